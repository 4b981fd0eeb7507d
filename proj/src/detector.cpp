#include "rttwatch/detector.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>

namespace rttwatch {

bool SignalState::observe(const RttSample& sample) {
    if (sample.timestamp_us < window_start_ || sample.timestamp_us >= window_end_) {
        ++rejected_;
        return false;
    }
    if (!short_min_ || sample.rtt_us < *short_min_) short_min_ = sample.rtt_us;
    return true;
}

int64_t SignalState::long_min() const {
    int64_t m = ring_.front().min_rtt;
    for (const auto& e : ring_) m = std::min<int64_t>(m, e.min_rtt);
    return m;
}

int SignalState::empty_in_long() const {
    // Gaps before the oldest entry lie outside the long window's span.
    int n = 0;
    for (size_t i = 1; i < ring_.size(); ++i) n += ring_[i].gap_before;
    return n;
}

void SignalState::reset_candidate() {
    candidate_count_ = 0;
    candidate_sign_ = 0;
    frozen_long_min_.reset();
}

std::optional<DetectorEvent> SignalState::tick(const DetectorConfig& cfg, int64_t now_us) {
    std::optional<uint32_t> closed = short_min_;
    short_min_.reset();
    window_start_ = now_us;
    window_end_ = now_us + cfg.short_window_us;

    // Frozen until the validator answers, or the operator clears.
    if (phase_ == Phase::AwaitingVerdict || phase_ == Phase::Parked) return std::nullopt;

    const size_t k = size_t(cfg.long_window_k);

    if (closed) {
        // Warm-up: comparisons start once the ring holds k non-empty minima.
        if (ring_.size() < k && candidate_count_ == 0) {
            ring_.push_back(RingEntry{*closed, empty_streak_});
            empty_streak_ = 0;
            return std::nullopt;
        }
        int64_t reference = frozen_long_min_ ? *frozen_long_min_ : long_min();
        int64_t diff = int64_t(*closed) - reference;
        int sign = diff > 0 ? 1 : (diff < 0 ? -1 : 0);
        bool exceeds = std::abs(diff) > cfg.threshold_us;
        if (exceeds && (candidate_sign_ == 0 || sign == candidate_sign_)) {
            if (candidate_count_ == 0) frozen_long_min_ = reference;
            candidate_sign_ = sign;
            ++candidate_count_;
            phase_ = Phase::Candidate;
            empty_streak_ = 0;
            if (candidate_count_ == cfg.long_window_k) {
                phase_ = Phase::AwaitingVerdict;
                DetectorEvent ev;
                ev.key = key_;
                ev.kind = EventKind::RttChange;
                ev.direction = sign > 0 ? ChangeDirection::Up : ChangeDirection::Down;
                ev.magnitude_us = std::abs(diff);
                ev.t_detect_us = now_us;
                return ev;
            }
            return std::nullopt;
        }
        reset_candidate();
        phase_ = Phase::Idle;
        ring_.push_back(RingEntry{*closed, empty_streak_});
        while (ring_.size() > k) ring_.pop_front();
        empty_streak_ = 0;
        return std::nullopt;
    }

    // Empty window: the long window extends by one unit; candidate
    // progress is neither advanced nor reset.
    ++empty_streak_;
    if (ring_.size() >= k) {
        int required = cfg.long_window_k * (empty_in_long() + 1);
        if (empty_streak_ >= required) {
            phase_ = Phase::AwaitingVerdict;
            DetectorEvent ev;
            ev.key = key_;
            ev.kind = EventKind::BlackholeSuspect;
            ev.t_detect_us = now_us;
            return ev;
        }
    }
    return std::nullopt;
}

void SignalState::resolve_benign() {
    if (phase_ != Phase::AwaitingVerdict) throw std::logic_error("resolve outside AwaitingVerdict");
    ring_.clear();
    reset_candidate();
    empty_streak_ = 0;
    short_min_.reset();
    phase_ = Phase::Idle;
}

void SignalState::resolve_hijack() {
    if (phase_ != Phase::AwaitingVerdict) throw std::logic_error("resolve outside AwaitingVerdict");
    phase_ = Phase::Parked;
}

void SignalState::clear() {
    ring_.clear();
    reset_candidate();
    empty_streak_ = 0;
    short_min_.reset();
    phase_ = Phase::Idle;
}

}  // namespace rttwatch
