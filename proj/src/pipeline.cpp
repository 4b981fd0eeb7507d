#include "rttwatch/pipeline.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>

namespace rttwatch {

Pipeline::Pipeline(PipelineConfig cfg, const MonitoredPrefixSet* monitored,
                   const PrefixOriginMap* origin_map)
    : cfg_(cfg), monitored_(monitored), origin_map_(origin_map) {
    if (!monitored_) throw std::invalid_argument("pipeline needs a monitored prefix set");
}

void Pipeline::push_raw(const RawSample& raw) {
    ++stats_.samples_in;
    if (raw.timestamp_us < last_ts_) {
        ++stats_.rejected_non_monotone;
        return;
    }
    if (!origin_map_) throw std::logic_error("raw input requires an origin map");
    NormalizeResult r = normalize(raw, *monitored_, *origin_map_);
    if (auto* sample = std::get_if<RttSample>(&r)) {
        --stats_.samples_in;  // push() counts it
        push(*sample);
        return;
    }
    switch (std::get<RejectReason>(r)) {
        case RejectReason::NotMonitored: ++stats_.rejected_not_monitored; break;
        case RejectReason::UnknownOrigin: ++stats_.rejected_unknown_origin; break;
        case RejectReason::InternalTraffic: ++stats_.rejected_internal; break;
        case RejectReason::BadRtt: ++stats_.rejected_bad_rtt; break;
        case RejectReason::NonMonotoneTimestamp: ++stats_.rejected_non_monotone; break;
    }
}

void Pipeline::push(const RttSample& sample) {
    ++stats_.samples_in;
    if (sample.timestamp_us < last_ts_) {
        ++stats_.rejected_non_monotone;
        return;
    }
    last_ts_ = sample.timestamp_us;
    const int64_t w = cfg_.detector.short_window_us;
    if (!started_) {
        started_ = true;
        next_boundary_ = (sample.timestamp_us / w) * w + w;
    }
    while (next_boundary_ <= sample.timestamp_us) {
        close_windows(next_boundary_);
        next_boundary_ += w;
    }
    auto it = states_.find(sample.key);
    if (it == states_.end()) {
        it = states_.emplace(sample.key, SignalState(sample.key, next_boundary_ - w, cfg_.detector)).first;
    }
    it->second.observe(sample);
    ++stats_.samples_accepted;
    for (auto& cv : change_validations_)
        if (cv->wants(sample.key)) cv->on_sample(sample);
    for (auto& bv : blackhole_validations_)
        if (bv->wants(sample.key)) bv->on_sample(sample);
}

void Pipeline::close_windows(int64_t boundary) {
    // 1. Tick every signal; each state is touched by exactly one worker.
    std::vector<SignalState*> order;
    order.reserve(states_.size());
    for (auto& [key, st] : states_) order.push_back(&st);

    std::vector<std::vector<DetectorEvent>> shard_events;
    int workers = std::max(1, cfg_.workers);
    if (workers == 1 || order.size() < 64) {
        shard_events.resize(1);
        for (SignalState* st : order) {
            if (auto ev = st->tick(cfg_.detector, boundary)) shard_events[0].push_back(*ev);
        }
    } else {
        shard_events.resize(size_t(workers));
        std::vector<std::thread> pool;
        for (int wi = 0; wi < workers; ++wi) {
            pool.emplace_back([&, wi] {
                for (size_t i = size_t(wi); i < order.size(); i += size_t(workers)) {
                    if (auto ev = order[i]->tick(cfg_.detector, boundary)) shard_events[size_t(wi)].push_back(*ev);
                }
            });
        }
        for (auto& t : pool) t.join();
    }
    std::vector<DetectorEvent> events;
    for (auto& se : shard_events) events.insert(events.end(), se.begin(), se.end());
    std::sort(events.begin(), events.end(),
              [](const DetectorEvent& a, const DetectorEvent& b) { return a.key < b.key; });
    stats_.detector_events += events.size();

    // 2. Refresh near-confirmed flags before any eligibility decision.
    for (auto& [key, st] : states_)
        registry_.set_near_confirmed(key, st.candidate_count() == cfg_.detector.long_window_k - 1);

    // 3. Advance ongoing validations in event order.
    for (auto it = change_validations_.begin(); it != change_validations_.end();) {
        if (auto verdict = (*it)->on_tick(boundary, registry_)) {
            apply_verdict(*verdict);
            it = change_validations_.erase(it);
        } else {
            ++it;
        }
    }
    for (auto it = blackhole_validations_.begin(); it != blackhole_validations_.end();) {
        if (auto verdict = (*it)->on_tick(boundary, registry_)) {
            apply_verdict(*verdict);
            it = blackhole_validations_.erase(it);
        } else {
            ++it;
        }
    }

    handle_new_events(events, boundary);
}

void Pipeline::handle_new_events(std::vector<DetectorEvent>& events, int64_t now_us) {
    if (events.empty()) return;

    if (!cfg_.validation_enabled) {
        for (const DetectorEvent& ev : events) {
            Verdict v;
            v.event = ev;
            v.outcome = Outcome::Hijack;
            v.t_classified_us = now_us;
            verdicts_.push_back(v);
            states_.at(ev.key).resolve_benign();  // keep the signal armed
        }
        return;
    }

    // Mark all simultaneous events first: concurrently flagged signals
    // must not serve as each other's buddies.
    for (const DetectorEvent& ev : events) registry_.set_under_validation(ev.key, true);

    for (const DetectorEvent& ev : events) {
        std::vector<Prefix24> buddies = eligible_buddies(ev, monitored_->expanded(), registry_);
        if (buddies.empty()) {
            Verdict v;
            v.event = ev;
            v.outcome = Outcome::Inconclusive;  // nothing reported
            v.t_classified_us = now_us;
            apply_verdict(v);
            continue;
        }
        if (ev.kind == EventKind::RttChange) {
            change_validations_.push_back(
                std::make_unique<ChangeValidation>(ev, cfg_.validation, std::move(buddies)));
        } else {
            blackhole_validations_.push_back(
                std::make_unique<BlackholeValidation>(ev, cfg_.validation, std::move(buddies)));
        }
    }
}

void Pipeline::apply_verdict(const Verdict& v) {
    registry_.set_under_validation(v.event.key, false);
    auto it = states_.find(v.event.key);
    if (it != states_.end() && it->second.phase() == SignalState::Phase::AwaitingVerdict) {
        if (v.outcome == Outcome::Hijack) {
            registry_.blacklist(v.event.key, v.t_classified_us);
            it->second.resolve_hijack();
        } else {
            it->second.resolve_benign();  // Inconclusive re-arms like Benign
        }
    }
    verdicts_.push_back(v);
}

void Pipeline::finish() {
    if (finished_) return;
    finished_ = true;
    int64_t end = started_ ? next_boundary_ - cfg_.detector.short_window_us : 0;
    for (auto& cv : change_validations_) {
        Verdict v;
        v.event = cv->event();
        v.outcome = Outcome::Inconclusive;  // stream ended mid-collection
        v.t_classified_us = end;
        apply_verdict(v);
    }
    change_validations_.clear();
    for (auto& bv : blackhole_validations_) {
        Verdict v;
        v.event = bv->event();
        v.outcome = Outcome::Inconclusive;
        v.t_classified_us = end;
        apply_verdict(v);
    }
    blackhole_validations_.clear();
}

}  // namespace rttwatch
