#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rttwatch/core_model.hpp"
#include "rttwatch/net.hpp"

namespace rttwatch {

enum class TraceEventKind { Interception, Blackhole, LinkFailureShift, LinkFailureLoss, LoadBalance };

struct EventSpec {
    double t_start_s = 60;
    TraceEventKind kind = TraceEventKind::Interception;
    int64_t delta_rtt_us = 0;       // Interception / LinkFailureShift / LoadBalance second path
    double split_fraction = 0.5;    // LoadBalance only
    std::vector<SignalKey> targets;
};

struct SignalSpec {
    SignalKey key;
    uint32_t base_rtt_us = 20'000;
    uint32_t jitter_us = 2'000;  // exponential noise scale above the floor
    double rate_samples_per_s = 40;
};

struct Scenario {
    std::string name;
    double duration_s = 120;
    std::vector<SignalSpec> signals;
    std::vector<EventSpec> events;
    uint64_t seed = 1;
};

struct TruthEvent {
    TraceEventKind kind;
    std::vector<SignalKey> targets;
    double t_start_s = 0;
    int64_t induced_delta_us = 0;
    bool hijack = false;  // Interception and Blackhole are hijacks
};

struct GroundTruth {
    std::vector<TruthEvent> events;
};

// Deterministic synthetic trace: Poisson arrivals per signal, one-sided
// exponential jitter above a hard base RTT, event effects applied from
// t_start on. Output is time ordered.
struct GeneratedTrace {
    std::vector<RttSample> samples;
    GroundTruth truth;
};

GeneratedTrace generate(const Scenario& scenario);

// Corpus profile mirroring the evaluation dataset shape: interception
// scenarios across magnitude bins, blackholes, link failures, load
// balancing and event-free runs.
struct CorpusProfile {
    int interceptions = 70;
    int blackholes = 100;
    int link_failures = 50;   // half shift, half loss
    int load_balances = 10;
    int event_free = 30;
    int signals_per_scenario = 12;
    uint32_t base_rtt_us = 20'000;
    uint32_t jitter_us = 2'000;
    double rate_samples_per_s = 40;
    double duration_s = 120;
    double event_at_s = 60;
    uint64_t seed = 42;
};

// Magnitude bins for interception deltas, in ms: (1,5], (5,10], (10,20], (20,40].
extern const double kMagnitudeBinsMs[5];
int magnitude_bin(int64_t delta_us);  // -1 if below the first bin edge

std::vector<Scenario> corpus(const CorpusProfile& profile);

// The twelve monitored /24s used by corpus scenarios, plus helpers to
// run them through the full raw-sample path.
MonitoredPrefixSet corpus_monitored_set();
PrefixOriginMap corpus_origin_map(const std::vector<Scenario>& scenarios);
RawSample to_raw(const RttSample& s, uint64_t mix);  // synthesizes endpoint IPs

// Scenario JSON (de)serialization for the CLI.
std::string scenario_to_json(const Scenario& s);
Scenario scenario_from_json(const std::string& text);
std::string truth_to_json(const GroundTruth& t);
GroundTruth truth_from_json(const std::string& text);

}  // namespace rttwatch
