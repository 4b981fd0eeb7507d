#include <algorithm>
#include <map>
#include <set>

#include "doctest.h"
#include "rttwatch/tracegen.hpp"

using namespace rttwatch;

namespace {

constexpr int64_t kSec = 1'000'000;

Prefix24 p24(uint32_t third_octet) { return Prefix24{(10u << 24) | (third_octet << 8)}; }

Scenario base_scenario() {
    Scenario sc;
    sc.name = "base";
    sc.duration_s = 60;
    sc.seed = 7;
    for (uint32_t i = 0; i < 3; ++i)
        sc.signals.push_back(SignalSpec{SignalKey{p24(i), 64500 + i}, 20'000, 2'000, 40});
    return sc;
}

std::vector<RttSample> of_key(const GeneratedTrace& tr, const SignalKey& k) {
    std::vector<RttSample> out;
    for (const RttSample& s : tr.samples)
        if (s.key == k) out.push_back(s);
    return out;
}

double mean_rtt(const std::vector<RttSample>& v, int64_t from_us, int64_t to_us) {
    double sum = 0;
    int n = 0;
    for (const RttSample& s : v)
        if (s.timestamp_us >= from_us && s.timestamp_us < to_us) sum += s.rtt_us, ++n;
    REQUIRE(n > 0);
    return sum / n;
}

}  // namespace

TEST_CASE("generation is deterministic and independent of signal order") {
    Scenario sc = base_scenario();
    GeneratedTrace a = generate(sc);
    GeneratedTrace b = generate(sc);
    REQUIRE(a.samples.size() == b.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) {
        CHECK(a.samples[i].timestamp_us == b.samples[i].timestamp_us);
        CHECK(a.samples[i].key == b.samples[i].key);
        CHECK(a.samples[i].rtt_us == b.samples[i].rtt_us);
    }

    std::reverse(sc.signals.begin(), sc.signals.end());
    GeneratedTrace c = generate(sc);
    REQUIRE(c.samples.size() == a.samples.size());
    for (size_t i = 0; i < a.samples.size(); ++i) CHECK(a.samples[i].rtt_us == c.samples[i].rtt_us);
}

TEST_CASE("samples are time ordered, in range, and near the nominal rate") {
    Scenario sc = base_scenario();
    GeneratedTrace tr = generate(sc);
    for (size_t i = 1; i < tr.samples.size(); ++i) {
        CHECK(tr.samples[i - 1].timestamp_us <= tr.samples[i].timestamp_us);
        if (tr.samples[i - 1].timestamp_us == tr.samples[i].timestamp_us)
            CHECK(tr.samples[i - 1].key < tr.samples[i].key);
    }
    CHECK(tr.samples.front().timestamp_us >= 0);
    CHECK(tr.samples.back().timestamp_us < int64_t(sc.duration_s * kSec));
    for (const SignalSpec& sig : sc.signals) {
        size_t n = of_key(tr, sig.key).size();
        double expect = sig.rate_samples_per_s * sc.duration_s;
        CHECK(n > expect * 0.85);
        CHECK(n < expect * 1.15);
        for (const RttSample& s : of_key(tr, sig.key)) CHECK(s.rtt_us >= sig.base_rtt_us);
    }
}

TEST_CASE("an interception event shifts the target by its delta") {
    Scenario sc = base_scenario();
    SignalKey target = sc.signals[0].key;
    sc.events.push_back(EventSpec{30, TraceEventKind::Interception, 8'000, 0.5, {target}});
    GeneratedTrace tr = generate(sc);

    auto hit = of_key(tr, target);
    double before = mean_rtt(hit, 0, 30 * kSec);
    double after = mean_rtt(hit, 30 * kSec, 60 * kSec);
    CHECK(after - before > 7'000);
    CHECK(after - before < 9'000);
    // every post-onset sample carries the full shift (one-sided jitter)
    for (const RttSample& s : hit)
        if (s.timestamp_us >= 30 * kSec) CHECK(s.rtt_us >= 28'000);

    // untouched signal is unchanged relative to the event-free run
    Scenario quiet = base_scenario();
    auto miss = of_key(tr, sc.signals[1].key);
    auto ref = of_key(generate(quiet), sc.signals[1].key);
    REQUIRE(miss.size() == ref.size());
    for (size_t i = 0; i < miss.size(); ++i) CHECK(miss[i].rtt_us == ref[i].rtt_us);

    REQUIRE(tr.truth.events.size() == 1);
    CHECK(tr.truth.events[0].hijack);
    CHECK(tr.truth.events[0].induced_delta_us == 8'000);
}

TEST_CASE("blackhole and loss events silence the target from onset") {
    for (TraceEventKind kind : {TraceEventKind::Blackhole, TraceEventKind::LinkFailureLoss}) {
        Scenario sc = base_scenario();
        SignalKey target = sc.signals[2].key;
        sc.events.push_back(EventSpec{30, kind, 0, 0.5, {target}});
        GeneratedTrace tr = generate(sc);
        auto hit = of_key(tr, target);
        CHECK(!hit.empty());
        for (const RttSample& s : hit) CHECK(s.timestamp_us < 30 * kSec);
        CHECK(tr.truth.events[0].hijack == (kind == TraceEventKind::Blackhole));
    }
}

TEST_CASE("a load-balance event splits traffic across two paths") {
    Scenario sc = base_scenario();
    SignalKey target = sc.signals[0].key;
    sc.duration_s = 120;
    sc.events.push_back(EventSpec{30, TraceEventKind::LoadBalance, 10'000, 0.5, {target}});
    GeneratedTrace tr = generate(sc);
    int shifted = 0, total = 0;
    for (const RttSample& s : of_key(tr, target))
        if (s.timestamp_us >= 30 * kSec) {
            ++total;
            if (s.rtt_us >= 30'000) ++shifted;
        }
    double frac = double(shifted) / total;
    CHECK(frac > 0.4);
    CHECK(frac < 0.6);
    CHECK(!tr.truth.events[0].hijack);
}

TEST_CASE("invalid scenarios are rejected with a reason") {
    Scenario sc = base_scenario();
    sc.events.push_back(EventSpec{90, TraceEventKind::Interception, 8'000, 0.5, {sc.signals[0].key}});
    CHECK_THROWS_WITH_AS(generate(sc), doctest::Contains("duration"), std::runtime_error);

    sc = base_scenario();
    sc.events.push_back(EventSpec{30, TraceEventKind::Interception, 8'000, 0.5, {SignalKey{p24(99), 1}}});
    CHECK_THROWS_WITH_AS(generate(sc), doctest::Contains("target"), std::runtime_error);

    sc = base_scenario();
    sc.signals[0].rate_samples_per_s = 0;
    sc.events.push_back(EventSpec{30, TraceEventKind::Interception, 8'000, 0.5, {sc.signals[0].key}});
    CHECK_THROWS_WITH_AS(generate(sc), doctest::Contains("rate"), std::runtime_error);

    sc = base_scenario();
    sc.signals.push_back(sc.signals[0]);
    CHECK_THROWS_WITH_AS(generate(sc), doctest::Contains("duplicate"), std::runtime_error);
}

TEST_CASE("magnitude bins cover the documented edges") {
    CHECK(magnitude_bin(900) == -1);
    CHECK(magnitude_bin(1'001) == 0);
    CHECK(magnitude_bin(5'000) == 0);
    CHECK(magnitude_bin(5'001) == 1);
    CHECK(magnitude_bin(10'000) == 1);
    CHECK(magnitude_bin(15'000) == 2);
    CHECK(magnitude_bin(20'001) == 3);
    CHECK(magnitude_bin(-8'000) == 1);  // binned by absolute value
    CHECK(magnitude_bin(400'000) == 3);
}

TEST_CASE("the corpus has the documented shape") {
    CorpusProfile prof;
    std::vector<Scenario> all = corpus(prof);
    REQUIRE(all.size() == 260);

    std::map<TraceEventKind, int> by_kind;
    int event_free = 0;
    std::set<int> interception_bins;
    bool saw_negative = false, saw_multi_target = false;
    for (const Scenario& sc : all) {
        CHECK(sc.signals.size() == 12);
        CHECK(sc.duration_s == 120);
        if (sc.events.empty()) {
            ++event_free;
            continue;
        }
        REQUIRE(sc.events.size() == 1);
        const EventSpec& ev = sc.events[0];
        ++by_kind[ev.kind];
        CHECK(ev.t_start_s == 60);
        if (ev.kind == TraceEventKind::Interception) {
            interception_bins.insert(magnitude_bin(ev.delta_rtt_us));
            if (ev.delta_rtt_us < 0) saw_negative = true;
            if (ev.targets.size() > 1) saw_multi_target = true;
        }
        if (ev.kind == TraceEventKind::LinkFailureShift || ev.kind == TraceEventKind::LinkFailureLoss)
            CHECK(ev.targets.size() == 12);  // link failures hit every signal
    }
    CHECK(event_free == 30);
    CHECK(by_kind[TraceEventKind::Interception] == 70);
    CHECK(by_kind[TraceEventKind::Blackhole] == 100);
    CHECK(by_kind[TraceEventKind::LinkFailureShift] + by_kind[TraceEventKind::LinkFailureLoss] == 50);
    CHECK(by_kind[TraceEventKind::LinkFailureShift] == 25);
    CHECK(by_kind[TraceEventKind::LoadBalance] == 10);
    CHECK(interception_bins == std::set<int>{0, 1, 2, 3});
    CHECK(saw_negative);
    CHECK(saw_multi_target);

    // scenarios use distinct remote ASes and distinct seeds
    std::set<uint32_t> ases;
    std::set<uint64_t> seeds;
    for (const Scenario& sc : all) {
        ases.insert(sc.signals[0].key.remote_as);
        seeds.insert(sc.seed);
    }
    CHECK(ases.size() == all.size());
    CHECK(seeds.size() == all.size());
}

TEST_CASE("corpus prefixes expand to the twelve monitored slash-24s") {
    MonitoredPrefixSet set = corpus_monitored_set();
    for (uint32_t i = 0; i < 12; ++i) CHECK(set.contains(p24(i)));
    CHECK(!set.contains(p24(12)));

    CorpusProfile prof;
    std::vector<Scenario> all = corpus(prof);
    for (const Scenario& sc : all)
        for (const SignalSpec& sig : sc.signals) CHECK(set.contains(sig.key.local_prefix));
}

TEST_CASE("raw conversion survives the normalization path") {
    CorpusProfile prof;
    prof.interceptions = 1;
    prof.blackholes = 0;
    prof.link_failures = 0;
    prof.load_balances = 0;
    prof.event_free = 0;
    std::vector<Scenario> all = corpus(prof);
    REQUIRE(all.size() == 1);
    MonitoredPrefixSet set = corpus_monitored_set();
    PrefixOriginMap origins = corpus_origin_map(all);
    GeneratedTrace tr = generate(all[0]);
    REQUIRE(!tr.samples.empty());
    for (size_t i = 0; i < std::min<size_t>(tr.samples.size(), 500); ++i) {
        const RttSample& s = tr.samples[i];
        auto norm = normalize(to_raw(s, all[0].seed + i), set, origins);
        REQUIRE(std::holds_alternative<RttSample>(norm));
        const RttSample& got = std::get<RttSample>(norm);
        CHECK(got.key == s.key);
        CHECK(got.timestamp_us == s.timestamp_us);
        CHECK(got.rtt_us == s.rtt_us);
    }
}

TEST_CASE("scenario and truth JSON round-trip") {
    Scenario sc = base_scenario();
    sc.events.push_back(EventSpec{30, TraceEventKind::LoadBalance, 10'000, 0.25, {sc.signals[0].key}});
    Scenario back = scenario_from_json(scenario_to_json(sc));
    CHECK(back.name == sc.name);
    CHECK(back.duration_s == sc.duration_s);
    CHECK(back.seed == sc.seed);
    REQUIRE(back.signals.size() == sc.signals.size());
    for (size_t i = 0; i < sc.signals.size(); ++i) {
        CHECK(back.signals[i].key == sc.signals[i].key);
        CHECK(back.signals[i].base_rtt_us == sc.signals[i].base_rtt_us);
        CHECK(back.signals[i].rate_samples_per_s == sc.signals[i].rate_samples_per_s);
    }
    REQUIRE(back.events.size() == 1);
    CHECK(back.events[0].kind == TraceEventKind::LoadBalance);
    CHECK(back.events[0].split_fraction == 0.25);
    CHECK(back.events[0].targets == sc.events[0].targets);

    GroundTruth t = generate(sc).truth;
    GroundTruth tb = truth_from_json(truth_to_json(t));
    REQUIRE(tb.events.size() == t.events.size());
    for (size_t i = 0; i < t.events.size(); ++i) {
        CHECK(tb.events[i].kind == t.events[i].kind);
        CHECK(tb.events[i].targets == t.events[i].targets);
        CHECK(tb.events[i].hijack == t.events[i].hijack);
        CHECK(tb.events[i].induced_delta_us == t.events[i].induced_delta_us);
    }

    CHECK_THROWS_AS(scenario_from_json("{\"version\":99}"), std::runtime_error);
}
