#include "rttwatch/tracegen.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace rttwatch {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Keyed on the signal only, so the stream does not depend on list order.
uint64_t signal_seed(uint64_t scenario_seed, const SignalKey& key) {
    uint64_t h = (uint64_t(key.local_prefix.base) << 32) | key.remote_as;
    return splitmix64(scenario_seed ^ splitmix64(h));
}

const char* kind_name(TraceEventKind k) {
    switch (k) {
        case TraceEventKind::Interception: return "interception";
        case TraceEventKind::Blackhole: return "blackhole";
        case TraceEventKind::LinkFailureShift: return "link_failure_shift";
        case TraceEventKind::LinkFailureLoss: return "link_failure_loss";
        case TraceEventKind::LoadBalance: return "load_balance";
    }
    return "?";
}

TraceEventKind kind_from_name(const std::string& s) {
    if (s == "interception") return TraceEventKind::Interception;
    if (s == "blackhole") return TraceEventKind::Blackhole;
    if (s == "link_failure_shift") return TraceEventKind::LinkFailureShift;
    if (s == "link_failure_loss") return TraceEventKind::LinkFailureLoss;
    if (s == "load_balance") return TraceEventKind::LoadBalance;
    throw std::runtime_error("unknown event kind: " + s);
}

nlohmann::json key_to_json(const SignalKey& k) {
    return {{"prefix", format_prefix24(k.local_prefix)}, {"as", k.remote_as}};
}

SignalKey key_from_json(const nlohmann::json& j) {
    auto p = parse_prefix(j.at("prefix").get<std::string>());
    if (!p || p->len != 24) throw std::runtime_error("bad /24 prefix in key");
    return SignalKey{Prefix24{p->base}, j.at("as").get<uint32_t>()};
}

}  // namespace

const double kMagnitudeBinsMs[5] = {1, 5, 10, 20, 40};

int magnitude_bin(int64_t delta_us) {
    double ms = std::abs(double(delta_us)) / 1000.0;
    if (ms <= kMagnitudeBinsMs[0]) return -1;
    for (int b = 0; b < 4; ++b)
        if (ms <= kMagnitudeBinsMs[b + 1]) return b;
    return 3;
}

GeneratedTrace generate(const Scenario& scenario) {
    GeneratedTrace out;
    const int64_t duration_us = int64_t(scenario.duration_s * 1e6);

    for (const EventSpec& ev : scenario.events) {
        if (ev.t_start_s < 0 || ev.t_start_s > scenario.duration_s)
            throw std::runtime_error("event outside scenario duration");
        for (const SignalKey& t : ev.targets) {
            auto hit = std::find_if(scenario.signals.begin(), scenario.signals.end(),
                                    [&](const SignalSpec& s) { return s.key == t; });
            if (hit == scenario.signals.end()) throw std::runtime_error("event targets unknown signal");
            if (hit->rate_samples_per_s <= 0)
                throw std::runtime_error("event targets a rate-0 signal (undetectable)");
        }
    }

    for (size_t i = 0; i < scenario.signals.size(); ++i)
        for (size_t j = i + 1; j < scenario.signals.size(); ++j)
            if (scenario.signals[i].key == scenario.signals[j].key)
                throw std::runtime_error("duplicate signal key in scenario");

    for (size_t i = 0; i < scenario.signals.size(); ++i) {
        const SignalSpec& sig = scenario.signals[i];
        if (sig.rate_samples_per_s <= 0) continue;
        std::mt19937_64 rng(signal_seed(scenario.seed, sig.key));
        std::exponential_distribution<double> inter_arrival(sig.rate_samples_per_s);
        std::exponential_distribution<double> jitter(1.0 / double(std::max<uint32_t>(sig.jitter_us, 1)));
        std::uniform_real_distribution<double> coin(0.0, 1.0);

        double t_s = 0;
        for (;;) {
            t_s += inter_arrival(rng);
            int64_t ts = int64_t(t_s * 1e6);
            if (ts >= duration_us) break;

            int64_t delta = 0;
            bool dropped = false;
            for (const EventSpec& ev : scenario.events) {
                if (t_s < ev.t_start_s) continue;
                if (std::find(ev.targets.begin(), ev.targets.end(), sig.key) == ev.targets.end()) continue;
                switch (ev.kind) {
                    case TraceEventKind::Blackhole:
                    case TraceEventKind::LinkFailureLoss:
                        dropped = true;
                        break;
                    case TraceEventKind::Interception:
                    case TraceEventKind::LinkFailureShift:
                        delta += ev.delta_rtt_us;
                        break;
                    case TraceEventKind::LoadBalance:
                        if (coin(rng) < ev.split_fraction) delta += ev.delta_rtt_us;
                        break;
                }
            }
            if (dropped) continue;  // arrivals still consume RNG draws uniformly

            int64_t rtt = int64_t(sig.base_rtt_us) + int64_t(jitter(rng)) + delta;
            if (rtt < 1) rtt = 1;
            out.samples.push_back(RttSample{ts, sig.key, uint32_t(rtt)});
        }
    }
    std::sort(out.samples.begin(), out.samples.end(), [](const RttSample& a, const RttSample& b) {
        if (a.timestamp_us != b.timestamp_us) return a.timestamp_us < b.timestamp_us;
        return a.key < b.key;
    });

    for (const EventSpec& ev : scenario.events) {
        TruthEvent t;
        t.kind = ev.kind;
        t.targets = ev.targets;
        t.t_start_s = ev.t_start_s;
        t.induced_delta_us = ev.delta_rtt_us;
        t.hijack = ev.kind == TraceEventKind::Interception || ev.kind == TraceEventKind::Blackhole;
        out.truth.events.push_back(std::move(t));
    }
    return out;
}

MonitoredPrefixSet corpus_monitored_set() {
    // Twelve /24s: a /21 plus a /22.
    MonitoredPrefixSet set;
    set.add(*parse_prefix("10.0.0.0/21"));
    set.add(*parse_prefix("10.0.8.0/22"));
    return set;
}

PrefixOriginMap corpus_origin_map(const std::vector<Scenario>& scenarios) {
    PrefixOriginMap map;
    std::vector<uint32_t> seen;
    for (const Scenario& sc : scenarios) {
        for (const SignalSpec& sig : sc.signals) {
            uint32_t as = sig.key.remote_as;
            if (std::find(seen.begin(), seen.end(), as) != seen.end()) continue;
            seen.push_back(as);
            uint32_t base = (100u << 24) | ((as & 0xffffu) << 8);
            map.add(Prefix{base, 24}, {65000, as});
        }
    }
    return map;
}

RawSample to_raw(const RttSample& s, uint64_t mix) {
    uint64_t h = splitmix64(uint64_t(s.timestamp_us) ^ mix);
    RawSample raw;
    raw.timestamp_us = s.timestamp_us;
    raw.local_ip = Ipv4{s.key.local_prefix.base | uint32_t(1 + (h & 0xfd))};
    raw.remote_ip = Ipv4{(100u << 24) | ((s.key.remote_as & 0xffffu) << 8) | uint32_t(1 + ((h >> 8) & 0xfd))};
    raw.rtt_us = s.rtt_us;
    return raw;
}

std::vector<Scenario> corpus(const CorpusProfile& profile) {
    std::vector<Scenario> out;
    auto monitored = corpus_monitored_set().expanded();
    int n24 = int(std::min<size_t>(monitored.size(), size_t(profile.signals_per_scenario)));
    uint64_t master = splitmix64(profile.seed);
    std::mt19937_64 rng(master);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    int index = 0;
    auto make_scenario = [&](const std::string& tag) {
        Scenario sc;
        sc.name = tag + "_" + std::to_string(index);
        sc.duration_s = profile.duration_s;
        sc.seed = splitmix64(master + uint64_t(++index) * 0x9e3779b97f4a7c15ULL);
        uint32_t remote_as = 64500 + uint32_t(index);
        for (int i = 0; i < n24; ++i) {
            SignalSpec sig;
            sig.key = SignalKey{monitored[size_t(i)], remote_as};
            sig.base_rtt_us = profile.base_rtt_us;
            sig.jitter_us = profile.jitter_us;
            sig.rate_samples_per_s = profile.rate_samples_per_s;
            sc.signals.push_back(sig);
        }
        return sc;
    };
    auto targets_of = [&](const Scenario& sc, int count, int first) {
        std::vector<SignalKey> t;
        for (int i = 0; i < count; ++i) t.push_back(sc.signals[size_t((first + i) % n24)].key);
        return t;
    };

    for (int i = 0; i < profile.interceptions; ++i) {
        Scenario sc = make_scenario("int");
        int bin = i % 4;
        double lo = kMagnitudeBinsMs[bin], hi = kMagnitudeBinsMs[bin + 1];
        double mag_ms = lo + unit(rng) * (hi - lo);
        int sign = (i % 7 == 6) ? -1 : 1;  // keep the downward path exercised
        EventSpec ev;
        ev.kind = TraceEventKind::Interception;
        ev.t_start_s = profile.event_at_s;
        ev.delta_rtt_us = sign * int64_t(mag_ms * 1000.0);
        ev.targets = targets_of(sc, (i % 3 == 0) ? 2 : 1, i % n24);
        sc.events.push_back(ev);
        out.push_back(std::move(sc));
    }
    for (int i = 0; i < profile.blackholes; ++i) {
        Scenario sc = make_scenario("bh");
        EventSpec ev;
        ev.kind = TraceEventKind::Blackhole;
        ev.t_start_s = profile.event_at_s;
        ev.targets = targets_of(sc, (i % 4 == 0) ? 2 : 1, i % n24);
        sc.events.push_back(ev);
        out.push_back(std::move(sc));
    }
    for (int i = 0; i < profile.link_failures; ++i) {
        Scenario sc = make_scenario("lf");
        EventSpec ev;
        ev.kind = (i % 2 == 0) ? TraceEventKind::LinkFailureShift : TraceEventKind::LinkFailureLoss;
        ev.t_start_s = profile.event_at_s;
        if (ev.kind == TraceEventKind::LinkFailureShift) {
            double mag_ms = 5.0 + unit(rng) * 15.0;
            ev.delta_rtt_us = ((i % 4 == 2) ? -1 : 1) * int64_t(mag_ms * 1000.0);
        }
        ev.targets = targets_of(sc, n24, 0);  // link failures hit every prefix uniformly
        sc.events.push_back(ev);
        out.push_back(std::move(sc));
    }
    for (int i = 0; i < profile.load_balances; ++i) {
        Scenario sc = make_scenario("lb");
        EventSpec ev;
        ev.kind = TraceEventKind::LoadBalance;
        ev.t_start_s = profile.event_at_s;
        ev.delta_rtt_us = int64_t((5.0 + unit(rng) * 10.0) * 1000.0);
        ev.split_fraction = 0.5;
        ev.targets = targets_of(sc, n24, 0);
        sc.events.push_back(ev);
        out.push_back(std::move(sc));
    }
    for (int i = 0; i < profile.event_free; ++i) {
        out.push_back(make_scenario("quiet"));
    }
    return out;
}

std::string scenario_to_json(const Scenario& s) {
    nlohmann::json j;
    j["version"] = 1;
    j["name"] = s.name;
    j["duration_s"] = s.duration_s;
    j["seed"] = s.seed;
    j["signals"] = nlohmann::json::array();
    for (const SignalSpec& sig : s.signals)
        j["signals"].push_back({{"key", key_to_json(sig.key)},
                                {"base_rtt_us", sig.base_rtt_us},
                                {"jitter_us", sig.jitter_us},
                                {"rate_samples_per_s", sig.rate_samples_per_s}});
    j["events"] = nlohmann::json::array();
    for (const EventSpec& ev : s.events) {
        nlohmann::json je = {{"t_start_s", ev.t_start_s},
                             {"kind", kind_name(ev.kind)},
                             {"delta_rtt_us", ev.delta_rtt_us},
                             {"split_fraction", ev.split_fraction},
                             {"targets", nlohmann::json::array()}};
        for (const SignalKey& k : ev.targets) je["targets"].push_back(key_to_json(k));
        j["events"].push_back(je);
    }
    return j.dump(2);
}

Scenario scenario_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    if (j.value("version", 0) != 1) throw std::runtime_error("scenario: unsupported schema version");
    Scenario s;
    s.name = j.value("name", "scenario");
    s.duration_s = j.at("duration_s").get<double>();
    s.seed = j.at("seed").get<uint64_t>();
    for (const auto& js : j.at("signals")) {
        SignalSpec sig;
        sig.key = key_from_json(js.at("key"));
        sig.base_rtt_us = js.at("base_rtt_us").get<uint32_t>();
        sig.jitter_us = js.at("jitter_us").get<uint32_t>();
        sig.rate_samples_per_s = js.at("rate_samples_per_s").get<double>();
        s.signals.push_back(sig);
    }
    for (const auto& je : j.value("events", nlohmann::json::array())) {
        EventSpec ev;
        ev.t_start_s = je.at("t_start_s").get<double>();
        ev.kind = kind_from_name(je.at("kind").get<std::string>());
        ev.delta_rtt_us = je.value("delta_rtt_us", int64_t{0});
        ev.split_fraction = je.value("split_fraction", 0.5);
        for (const auto& jk : je.at("targets")) ev.targets.push_back(key_from_json(jk));
        s.events.push_back(ev);
    }
    return s;
}

std::string truth_to_json(const GroundTruth& t) {
    nlohmann::json j;
    j["version"] = 1;
    j["events"] = nlohmann::json::array();
    for (const TruthEvent& ev : t.events) {
        nlohmann::json je = {{"kind", kind_name(ev.kind)},
                             {"t_start_s", ev.t_start_s},
                             {"induced_delta_us", ev.induced_delta_us},
                             {"label", ev.hijack ? "hijack" : "non-hijack"},
                             {"targets", nlohmann::json::array()}};
        for (const SignalKey& k : ev.targets) je["targets"].push_back(key_to_json(k));
        j["events"].push_back(je);
    }
    return j.dump(2);
}

GroundTruth truth_from_json(const std::string& text) {
    auto j = nlohmann::json::parse(text);
    if (j.value("version", 0) != 1) throw std::runtime_error("truth: unsupported schema version");
    GroundTruth t;
    for (const auto& je : j.at("events")) {
        TruthEvent ev;
        ev.kind = kind_from_name(je.at("kind").get<std::string>());
        ev.t_start_s = je.at("t_start_s").get<double>();
        ev.induced_delta_us = je.value("induced_delta_us", int64_t{0});
        ev.hijack = je.at("label").get<std::string>() == "hijack";
        for (const auto& jk : je.at("targets")) ev.targets.push_back(key_from_json(jk));
        t.events.push_back(std::move(ev));
    }
    return t;
}

}  // namespace rttwatch
