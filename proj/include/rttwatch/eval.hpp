#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rttwatch/pipeline.hpp"
#include "rttwatch/tracegen.hpp"
#include "rttwatch/validator.hpp"

namespace rttwatch {

struct EvalConfig {
    double matching_window_s = 30;  // max onset-to-detect gap for a TP match
};

struct EvalReport {
    int tp = 0, fp = 0, fn = 0, tn = 0;
    std::optional<double> precision;  // undefined when tp + fp == 0
    std::optional<double> recall;
    // recall per |delta| magnitude bin (interception events only)
    std::map<int, std::pair<int, int>> bin_hits;  // bin -> (detected, total)
    std::string config_echo;

    std::optional<double> bin_recall(int bin) const {
        auto it = bin_hits.find(bin);
        if (it == bin_hits.end() || it->second.second == 0) return std::nullopt;
        return double(it->second.first) / double(it->second.second);
    }
};

// One corpus scenario's outputs next to its ground truth.
struct ScenarioResult {
    GroundTruth truth;
    std::vector<Verdict> verdicts;
};

// An alert is a TP iff a hijack-labeled truth event overlapping the
// alert's key exists with onset within the matching window before the
// detection time. Unmatched alerts are FPs, unmatched hijack events FNs,
// alert-free non-hijack events TNs.
EvalReport score(const std::vector<ScenarioResult>& results, const EvalConfig& cfg);

struct DelayCdf {
    std::vector<double> interception_s;  // sorted classification delays
    std::vector<double> blackhole_s;
    std::vector<double> non_hijack_s;

    static double fraction_within(const std::vector<double>& delays, double limit_s);
};

// Classification delay = t_classified - event onset, per event class,
// over conclusive verdicts matched to truth events.
DelayCdf delay_cdf(const std::vector<ScenarioResult>& results, const EvalConfig& cfg);

// Runs the full pipeline over every scenario of a corpus. Scenarios are
// independent; `workers` of them run in parallel.
std::vector<ScenarioResult> run_corpus(const std::vector<Scenario>& scenarios, PipelineConfig cfg,
                                       int workers = 1);

struct BenchLoadPoint {
    double load_samples_per_s = 0;
    double minimum_min_us = 0, minimum_median_us = 0, minimum_max_us = 0;
    double change_min_us = 0, change_median_us = 0, change_max_us = 0;
    double validation_min_us = 0, validation_median_us = 0, validation_max_us = 0;
    double realtime_factor = 0;  // trace seconds processed per wall second
};

struct BenchReport {
    std::vector<BenchLoadPoint> points;  // one per load class
};

struct BenchProfile {
    std::vector<double> loads_samples_per_s = {600, 3000, 5000};
    int signals = 500;
    double duration_s = 30;
    uint64_t seed = 7;
};

// Times the minimum-update, change-comparison and validation-test code
// paths at the configured loads.
BenchReport bench(const BenchProfile& profile);

// Buddy availability from route-table dumps: prefixes grouped per
// viewpoint by (origin AS, full AS path); buddy count = group size - 1.
struct BuddyCensus {
    struct Viewpoint {
        std::string name;
        std::map<std::string, int> buddy_count;  // prefix -> buddies
    };
    std::vector<Viewpoint> viewpoints;
    // CCDF over per-prefix buddy counts: x -> fraction of prefixes with
    // count >= x, for the min/median/max viewpoint aggregation.
    std::vector<std::tuple<int, double, double, double>> ccdf;  // (x, min, median, max)
};

BuddyCensus buddy_census(const std::vector<std::pair<std::string, PrefixOriginMap>>& dumps);

std::string eval_report_csv(const EvalReport& r);
std::string delay_cdf_csv(const DelayCdf& c);
std::string census_ccdf_csv(const BuddyCensus& c);

}  // namespace rttwatch
