#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "rttwatch/core_model.hpp"
#include "rttwatch/detector.hpp"
#include "rttwatch/validator.hpp"

namespace rttwatch {

struct PipelineConfig {
    DetectorConfig detector;
    ValidationParams validation;
    bool validation_enabled = true;
    int workers = 1;
};

struct PipelineStats {
    uint64_t samples_in = 0;
    uint64_t samples_accepted = 0;
    uint64_t rejected_not_monitored = 0;
    uint64_t rejected_unknown_origin = 0;
    uint64_t rejected_internal = 0;
    uint64_t rejected_non_monotone = 0;
    uint64_t rejected_bad_rtt = 0;
    uint64_t detector_events = 0;
};

// Offline/streaming detection pipeline: normalizes raw samples, drives
// per-signal detectors on a one-second grid aligned to the first sample,
// and serializes all validation and registry decisions at window
// boundaries. Pure function of (input stream, config).
class Pipeline {
  public:
    Pipeline(PipelineConfig cfg, const MonitoredPrefixSet* monitored, const PrefixOriginMap* origin_map);

    // Raw trace entry point (applies normalize()).
    void push_raw(const RawSample& raw);
    // Pre-keyed entry point.
    void push(const RttSample& sample);

    // Ends the stream: pending validations resolve Inconclusive.
    void finish();

    const std::vector<Verdict>& verdicts() const { return verdicts_; }
    const PipelineStats& stats() const { return stats_; }
    BuddyRegistry& registry() { return registry_; }
    const BuddyRegistry& registry() const { return registry_; }

  private:
    void close_windows(int64_t boundary);
    void handle_new_events(std::vector<DetectorEvent>& events, int64_t now_us);
    void apply_verdict(const Verdict& v);

    PipelineConfig cfg_;
    const MonitoredPrefixSet* monitored_;
    const PrefixOriginMap* origin_map_;
    std::map<SignalKey, SignalState> states_;
    BuddyRegistry registry_;
    std::vector<std::unique_ptr<ChangeValidation>> change_validations_;
    std::vector<std::unique_ptr<BlackholeValidation>> blackhole_validations_;
    std::vector<Verdict> verdicts_;
    PipelineStats stats_;
    int64_t next_boundary_ = 0;
    int64_t last_ts_ = INT64_MIN;
    bool started_ = false;
    bool finished_ = false;
};

}  // namespace rttwatch
