#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rttwatch/detector.hpp"
#include "rttwatch/net.hpp"

namespace rttwatch {

enum class VoteMode { Unanimous, Majority };

struct ValidationParams {
    int num_buddies = 3;         // B
    int samples_per_side = 20;   // m
    double alpha = 0.05;         // confidence level
    int repetitions = 2;         // R
    VoteMode vote_mode = VoteMode::Unanimous;
    int64_t collection_timeout_us = 30'000'000;
};

enum class BuddyStatus { Clear, UnderValidation, NearConfirmed, Blacklisted };

// Serialized authority over per-(prefix, remote AS) validation status.
// Blacklist entries persist until the operator clears them.
class BuddyRegistry {
  public:
    BuddyStatus status(const SignalKey& key) const;

    void set_under_validation(const SignalKey& key, bool on);
    void set_near_confirmed(const SignalKey& key, bool on);
    void blacklist(const SignalKey& key, int64_t since_us);
    bool clear_blacklist(const SignalKey& key);  // operator action

    std::vector<std::pair<SignalKey, int64_t>> blacklisted() const;

    // JSON persistence for the operator-facing blacklist.
    std::string serialize() const;
    static BuddyRegistry deserialize(const std::string& json_text);

  private:
    struct State {
        bool under_validation = false;
        bool near_confirmed = false;
        bool blacklisted = false;
        int64_t blacklisted_since_us = 0;
    };
    std::unordered_map<SignalKey, State, SignalKeyHash> states_;
};

// All monitored /24s other than the event's own prefix, toward the same
// remote AS, whose status is Clear. Collection-time sample arrival
// decides the first-come-first-served order later.
std::vector<Prefix24> eligible_buddies(const DetectorEvent& event,
                                       const std::vector<Prefix24>& monitored,
                                       const BuddyRegistry& registry);

enum class Outcome { Hijack, Benign, Inconclusive };

struct TestResult {
    SignalKey buddy;
    double u_stat = 0;
    double p_value = 1;
    int repetition = 0;
};

struct Verdict {
    DetectorEvent event;
    Outcome outcome = Outcome::Inconclusive;
    std::vector<TestResult> tests;
    std::vector<Prefix24> buddies_used;
    int64_t t_classified_us = 0;
};

// Validation of one RttChange event, driven by the replay clock. Fresh
// samples are collected for every repetition; a repetition completes at
// the first tick where the flagged signal and enough buddies reached m
// samples, or at the collection timeout with whatever buddies qualified.
class ChangeValidation {
  public:
    ChangeValidation(DetectorEvent event, ValidationParams params, std::vector<Prefix24> candidate_buddies);

    const DetectorEvent& event() const { return event_; }

    // Post-event sample routed to this validation (flagged key or any
    // candidate buddy key toward the event's remote AS).
    void on_sample(const RttSample& sample);

    // Advances at window boundaries; a final verdict ends the validation.
    std::optional<Verdict> on_tick(int64_t now_us, const BuddyRegistry& registry);

    bool wants(const SignalKey& key) const;

  private:
    struct Collected {
        std::vector<uint32_t> samples;
        int64_t first_sample_us = -1;
    };

    void start_repetition(int64_t now_us);
    std::optional<Verdict> finish(Outcome outcome, int64_t now_us);

    DetectorEvent event_;
    ValidationParams params_;
    std::vector<Prefix24> candidates_;
    std::unordered_map<SignalKey, Collected, SignalKeyHash> collected_;
    std::vector<TestResult> all_tests_;
    std::vector<Prefix24> buddies_used_;
    int repetition_ = 0;
    int64_t rep_start_us_ = 0;
    bool started_ = false;
};

// Validation of one BlackholeSuspect event. Any flagged sample discards
// the suspicion immediately; a silent flagged signal plus at least one
// active eligible buddy confirms it; total silence until the timeout is
// inconclusive. Decisions land on tick boundaries, at least one window
// after detection.
class BlackholeValidation {
  public:
    BlackholeValidation(DetectorEvent event, ValidationParams params, std::vector<Prefix24> candidate_buddies);

    const DetectorEvent& event() const { return event_; }
    void on_sample(const RttSample& sample);
    std::optional<Verdict> on_tick(int64_t now_us, const BuddyRegistry& registry);
    bool wants(const SignalKey& key) const;

  private:
    DetectorEvent event_;
    ValidationParams params_;
    std::vector<Prefix24> candidates_;
    bool flagged_sample_seen_ = false;
    std::unordered_map<SignalKey, int64_t, SignalKeyHash> buddy_first_sample_;
};

}  // namespace rttwatch
