#include "rttwatch/validator.hpp"

#include <algorithm>
#include <stdexcept>

#include "json.hpp"
#include "rttwatch/stats.hpp"

namespace rttwatch {

BuddyStatus BuddyRegistry::status(const SignalKey& key) const {
    auto it = states_.find(key);
    if (it == states_.end()) return BuddyStatus::Clear;
    const State& s = it->second;
    if (s.blacklisted) return BuddyStatus::Blacklisted;
    if (s.under_validation) return BuddyStatus::UnderValidation;
    if (s.near_confirmed) return BuddyStatus::NearConfirmed;
    return BuddyStatus::Clear;
}

void BuddyRegistry::set_under_validation(const SignalKey& key, bool on) {
    states_[key].under_validation = on;
}

void BuddyRegistry::set_near_confirmed(const SignalKey& key, bool on) {
    states_[key].near_confirmed = on;
}

void BuddyRegistry::blacklist(const SignalKey& key, int64_t since_us) {
    State& s = states_[key];
    s.blacklisted = true;
    s.blacklisted_since_us = since_us;
}

bool BuddyRegistry::clear_blacklist(const SignalKey& key) {
    auto it = states_.find(key);
    if (it == states_.end() || !it->second.blacklisted) return false;
    it->second.blacklisted = false;
    return true;
}

std::vector<std::pair<SignalKey, int64_t>> BuddyRegistry::blacklisted() const {
    std::vector<std::pair<SignalKey, int64_t>> out;
    for (const auto& [key, s] : states_)
        if (s.blacklisted) out.emplace_back(key, s.blacklisted_since_us);
    std::sort(out.begin(), out.end());
    return out;
}

std::string BuddyRegistry::serialize() const {
    nlohmann::json j;
    j["version"] = 1;
    j["blacklist"] = nlohmann::json::array();
    for (const auto& [key, since] : blacklisted()) {
        j["blacklist"].push_back({{"prefix", format_prefix24(key.local_prefix)},
                                  {"as", key.remote_as},
                                  {"since_us", since}});
    }
    return j.dump();
}

BuddyRegistry BuddyRegistry::deserialize(const std::string& json_text) {
    BuddyRegistry reg;
    auto j = nlohmann::json::parse(json_text);
    if (j.value("version", 0) != 1) throw std::runtime_error("registry: unsupported schema version");
    for (const auto& e : j.at("blacklist")) {
        auto p = parse_prefix(e.at("prefix").get<std::string>());
        if (!p || p->len != 24) throw std::runtime_error("registry: bad prefix");
        reg.blacklist(SignalKey{Prefix24{p->base}, e.at("as").get<uint32_t>()},
                      e.at("since_us").get<int64_t>());
    }
    return reg;
}

std::vector<Prefix24> eligible_buddies(const DetectorEvent& event,
                                       const std::vector<Prefix24>& monitored,
                                       const BuddyRegistry& registry) {
    std::vector<Prefix24> out;
    for (Prefix24 p : monitored) {
        if (p == event.key.local_prefix) continue;
        if (registry.status(SignalKey{p, event.key.remote_as}) != BuddyStatus::Clear) continue;
        out.push_back(p);
    }
    return out;
}

ChangeValidation::ChangeValidation(DetectorEvent event, ValidationParams params,
                                   std::vector<Prefix24> candidate_buddies)
    : event_(event), params_(params), candidates_(std::move(candidate_buddies)) {
    start_repetition(event_.t_detect_us);
}

void ChangeValidation::start_repetition(int64_t now_us) {
    ++repetition_;
    rep_start_us_ = now_us;
    collected_.clear();
}

bool ChangeValidation::wants(const SignalKey& key) const {
    if (key.remote_as != event_.key.remote_as) return false;
    if (key.local_prefix == event_.key.local_prefix) return true;
    return std::find(candidates_.begin(), candidates_.end(), key.local_prefix) != candidates_.end();
}

void ChangeValidation::on_sample(const RttSample& sample) {
    if (sample.timestamp_us < rep_start_us_) return;
    Collected& c = collected_[sample.key];
    if (c.first_sample_us < 0) c.first_sample_us = sample.timestamp_us;
    if (int(c.samples.size()) < params_.samples_per_side) c.samples.push_back(sample.rtt_us);
}

std::optional<Verdict> ChangeValidation::finish(Outcome outcome, int64_t now_us) {
    Verdict v;
    v.event = event_;
    v.outcome = outcome;
    v.tests = all_tests_;
    v.buddies_used = buddies_used_;
    v.t_classified_us = now_us;
    return v;
}

std::optional<Verdict> ChangeValidation::on_tick(int64_t now_us, const BuddyRegistry& registry) {
    if (now_us <= rep_start_us_) return std::nullopt;

    const int m = params_.samples_per_side;
    auto flagged_it = collected_.find(event_.key);
    bool flagged_full = flagged_it != collected_.end() && int(flagged_it->second.samples.size()) >= m;

    // First come, first served among buddies that are still Clear.
    std::vector<std::pair<int64_t, Prefix24>> qualified;
    for (Prefix24 p : candidates_) {
        SignalKey key{p, event_.key.remote_as};
        if (registry.status(key) != BuddyStatus::Clear) continue;
        auto it = collected_.find(key);
        if (it == collected_.end() || int(it->second.samples.size()) < m) continue;
        qualified.emplace_back(it->second.first_sample_us, p);
    }
    std::sort(qualified.begin(), qualified.end());

    bool timed_out = now_us - rep_start_us_ >= params_.collection_timeout_us;
    bool ready = flagged_full && int(qualified.size()) >= params_.num_buddies;
    if (!ready && timed_out) {
        if (!flagged_full || qualified.empty()) return finish(Outcome::Inconclusive, now_us);
        ready = true;
    }
    if (!ready) return std::nullopt;

    size_t use = std::min<size_t>(qualified.size(), size_t(params_.num_buddies));
    int rejecting = 0;
    std::vector<Prefix24> used_now;
    for (size_t i = 0; i < use; ++i) {
        SignalKey key{qualified[i].second, event_.key.remote_as};
        const auto& buddy_samples = collected_[key].samples;
        auto rs = rank_sum(flagged_it->second.samples, buddy_samples);
        double p = mwu_two_sided_p(flagged_it->second.samples, buddy_samples);
        all_tests_.push_back(TestResult{key, rs.u_a, p, repetition_});
        used_now.push_back(qualified[i].second);
        if (p < params_.alpha) ++rejecting;
    }
    for (Prefix24 p : used_now)
        if (std::find(buddies_used_.begin(), buddies_used_.end(), p) == buddies_used_.end())
            buddies_used_.push_back(p);

    bool difference = params_.vote_mode == VoteMode::Unanimous ? rejecting == int(use)
                                                               : rejecting * 2 > int(use);
    if (!difference) return finish(Outcome::Benign, now_us);
    if (repetition_ >= params_.repetitions) return finish(Outcome::Hijack, now_us);
    start_repetition(now_us);
    return std::nullopt;
}

BlackholeValidation::BlackholeValidation(DetectorEvent event, ValidationParams params,
                                         std::vector<Prefix24> candidate_buddies)
    : event_(event), params_(params), candidates_(std::move(candidate_buddies)) {}

bool BlackholeValidation::wants(const SignalKey& key) const {
    if (key.remote_as != event_.key.remote_as) return false;
    if (key.local_prefix == event_.key.local_prefix) return true;
    return std::find(candidates_.begin(), candidates_.end(), key.local_prefix) != candidates_.end();
}

void BlackholeValidation::on_sample(const RttSample& sample) {
    if (sample.timestamp_us < event_.t_detect_us) return;
    if (sample.key == event_.key) {
        flagged_sample_seen_ = true;
        return;
    }
    auto [it, inserted] = buddy_first_sample_.try_emplace(sample.key, sample.timestamp_us);
    (void)it;
    (void)inserted;
}

std::optional<Verdict> BlackholeValidation::on_tick(int64_t now_us, const BuddyRegistry& registry) {
    if (now_us <= event_.t_detect_us) return std::nullopt;
    Verdict v;
    v.event = event_;
    v.t_classified_us = now_us;
    if (flagged_sample_seen_) {
        v.outcome = Outcome::Benign;  // discard the blackhole assumption
        return v;
    }
    for (Prefix24 p : candidates_) {
        SignalKey key{p, event_.key.remote_as};
        if (registry.status(key) != BuddyStatus::Clear) continue;
        if (buddy_first_sample_.count(key)) {
            v.outcome = Outcome::Hijack;
            v.buddies_used.push_back(p);
            return v;
        }
    }
    if (now_us - event_.t_detect_us >= params_.collection_timeout_us) {
        v.outcome = Outcome::Inconclusive;  // total silence, nothing to report
        return v;
    }
    return std::nullopt;
}

}  // namespace rttwatch
