#pragma once

#include <cstdint>
#include <deque>
#include <optional>

#include "rttwatch/core_model.hpp"
#include "rttwatch/net.hpp"

namespace rttwatch {

struct DetectorConfig {
    int64_t threshold_us = 3000;          // change threshold T
    int64_t short_window_us = 1'000'000;  // short-term window length
    int long_window_k = 4;                // long-term width, in short windows;
                                          // also the required consecutive confirmations
};

enum class EventKind { RttChange, BlackholeSuspect };
enum class ChangeDirection { Up, Down };

struct DetectorEvent {
    SignalKey key;
    EventKind kind = EventKind::RttChange;
    ChangeDirection direction = ChangeDirection::Up;
    int64_t magnitude_us = 0;  // |confirming diff|, RttChange only
    int64_t t_detect_us = 0;   // close time of the confirming window
};

// Streaming per-signal state. Compares the open short window's minimum
// against the minimum over the last long_window_k non-empty windows once
// per tick; a change must exceed the threshold with a consistent sign in
// long_window_k consecutive windows before an event is emitted. Empty
// windows extend the long window instead of draining it and feed the
// blackhole watch: suspicion fires after long_window_k * (n+1)
// consecutive empty windows, n being the empty windows interleaved in
// the current long-term window.
class SignalState {
  public:
    enum class Phase { Idle, Candidate, AwaitingVerdict, Parked };

    SignalState(SignalKey key, int64_t first_window_start, const DetectorConfig& cfg)
        : key_(key), window_start_(first_window_start), window_end_(first_window_start + cfg.short_window_us) {}

    const SignalKey& key() const { return key_; }
    Phase phase() const { return phase_; }
    int candidate_count() const { return candidate_count_; }
    uint64_t rejected_samples() const { return rejected_; }
    int64_t window_end_us() const { return window_end_; }

    // Folds one sample into the open window's minimum. O(1), nothing
    // retained. Returns false (and counts) for out-of-window timestamps.
    bool observe(const RttSample& sample);

    // Closes the open short window. `now_us` must equal the window end.
    std::optional<DetectorEvent> tick(const DetectorConfig& cfg, int64_t now_us);

    // Re-arms after validation. Benign restarts the baseline from
    // post-change data; Hijack parks the signal until clear().
    void resolve_benign();
    void resolve_hijack();
    void clear();

  private:
    struct RingEntry {
        uint32_t min_rtt;
        int gap_before;  // empty short windows since the previous entry
    };

    int64_t long_min() const;
    int empty_in_long() const;  // n: interior gaps, trailing streak excluded
    void reset_candidate();

    SignalKey key_;
    int64_t window_start_;
    int64_t window_end_;
    std::optional<uint32_t> short_min_;
    std::deque<RingEntry> ring_;
    std::optional<int64_t> frozen_long_min_;
    int candidate_count_ = 0;
    int candidate_sign_ = 0;  // 0 none, +1, -1
    int empty_streak_ = 0;
    Phase phase_ = Phase::Idle;
    uint64_t rejected_ = 0;
};

}  // namespace rttwatch
