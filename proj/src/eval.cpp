#include "rttwatch/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include "rttwatch/pipeline.hpp"
#include "rttwatch/stats.hpp"

namespace rttwatch {

namespace {

bool targets_contain(const TruthEvent& ev, const SignalKey& key) {
    return std::find(ev.targets.begin(), ev.targets.end(), key) != ev.targets.end();
}

// truth event matches an alert when the key overlaps and detection falls
// within the matching window after onset
bool matches(const TruthEvent& ev, const Verdict& v, double window_s) {
    if (!targets_contain(ev, v.event.key)) return false;
    double detect_s = double(v.event.t_detect_us) / 1e6;
    return detect_s >= ev.t_start_s && detect_s - ev.t_start_s <= window_s;
}

double percentile_sorted(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) return 0;
    double pos = q * double(sorted.size() - 1);
    size_t lo = size_t(pos);
    size_t hi = std::min(lo + 1, sorted.size() - 1);
    double frac = pos - double(lo);
    return sorted[lo] * (1 - frac) + sorted[hi] * frac;
}

struct PathStats {
    double min_us = 0, median_us = 0, max_us = 0;
};

PathStats summarize(std::vector<double>& samples_us) {
    PathStats s;
    if (samples_us.empty()) return s;
    std::sort(samples_us.begin(), samples_us.end());
    s.min_us = samples_us.front();
    s.max_us = samples_us.back();
    s.median_us = percentile_sorted(samples_us, 0.5);
    return s;
}

}  // namespace

EvalReport score(const std::vector<ScenarioResult>& results, const EvalConfig& cfg) {
    EvalReport r;
    for (const ScenarioResult& res : results) {
        std::vector<bool> event_alerted(res.truth.events.size(), false);
        for (const Verdict& v : res.verdicts) {
            if (v.outcome != Outcome::Hijack) continue;
            bool matched = false;
            for (size_t i = 0; i < res.truth.events.size(); ++i) {
                const TruthEvent& ev = res.truth.events[i];
                if (!ev.hijack || !matches(ev, v, cfg.matching_window_s)) continue;
                matched = true;
                event_alerted[i] = true;
            }
            matched ? ++r.tp : ++r.fp;
        }
        for (size_t i = 0; i < res.truth.events.size(); ++i) {
            const TruthEvent& ev = res.truth.events[i];
            if (ev.hijack) {
                if (!event_alerted[i]) ++r.fn;
                if (ev.kind == TraceEventKind::Interception) {
                    int bin = magnitude_bin(ev.induced_delta_us);
                    auto& [detected, total] = r.bin_hits[bin];
                    ++total;
                    if (event_alerted[i]) ++detected;
                }
            } else {
                // a non-hijack event is a TN unless some hijack alert keyed
                // into it within the window
                bool alerted = false;
                for (const Verdict& v : res.verdicts)
                    if (v.outcome == Outcome::Hijack && matches(ev, v, cfg.matching_window_s)) alerted = true;
                if (!alerted) ++r.tn;
            }
        }
    }
    if (r.tp + r.fp > 0) r.precision = double(r.tp) / double(r.tp + r.fp);
    if (r.tp + r.fn > 0) r.recall = double(r.tp) / double(r.tp + r.fn);
    return r;
}

double DelayCdf::fraction_within(const std::vector<double>& delays, double limit_s) {
    if (delays.empty()) return 0;
    size_t n = 0;
    for (double d : delays)
        if (d <= limit_s) ++n;
    return double(n) / double(delays.size());
}

DelayCdf delay_cdf(const std::vector<ScenarioResult>& results, const EvalConfig& cfg) {
    DelayCdf cdf;
    for (const ScenarioResult& res : results) {
        for (const Verdict& v : res.verdicts) {
            if (v.outcome == Outcome::Inconclusive) continue;
            const TruthEvent* best = nullptr;
            for (const TruthEvent& ev : res.truth.events)
                if (matches(ev, v, cfg.matching_window_s) && (!best || ev.t_start_s > best->t_start_s))
                    best = &ev;
            if (!best) continue;
            double delay = double(v.t_classified_us) / 1e6 - best->t_start_s;
            if (best->hijack && v.outcome != Outcome::Hijack) continue;
            if (best->kind == TraceEventKind::Interception)
                cdf.interception_s.push_back(delay);
            else if (best->kind == TraceEventKind::Blackhole)
                cdf.blackhole_s.push_back(delay);
            else
                cdf.non_hijack_s.push_back(delay);
        }
    }
    std::sort(cdf.interception_s.begin(), cdf.interception_s.end());
    std::sort(cdf.blackhole_s.begin(), cdf.blackhole_s.end());
    std::sort(cdf.non_hijack_s.begin(), cdf.non_hijack_s.end());
    return cdf;
}

std::vector<ScenarioResult> run_corpus(const std::vector<Scenario>& scenarios, PipelineConfig cfg, int workers) {
    PrefixOriginMap origin_map = corpus_origin_map(scenarios);
    std::vector<ScenarioResult> results(scenarios.size());

    auto run_one = [&](size_t i) {
        const Scenario& sc = scenarios[i];
        MonitoredPrefixSet monitored;
        for (const SignalSpec& sig : sc.signals) monitored.add(sig.key.local_prefix.as_prefix());
        GeneratedTrace trace = generate(sc);
        Pipeline pipe(cfg, &monitored, &origin_map);
        for (const RttSample& s : trace.samples) pipe.push_raw(to_raw(s, sc.seed));
        pipe.finish();
        results[i] = ScenarioResult{std::move(trace.truth), pipe.verdicts()};
    };

    if (workers <= 1 || scenarios.size() < 2) {
        for (size_t i = 0; i < scenarios.size(); ++i) run_one(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        int n = std::min<int>(workers, int(scenarios.size()));
        for (int w = 0; w < n; ++w)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < scenarios.size(); i = next.fetch_add(1)) run_one(i);
            });
        for (auto& t : pool) t.join();
    }
    return results;
}

BenchReport bench(const BenchProfile& profile) {
    using clock = std::chrono::steady_clock;
    BenchReport report;

    for (double load : profile.loads_samples_per_s) {
        Scenario sc;
        sc.name = "bench";
        sc.duration_s = profile.duration_s;
        sc.seed = profile.seed;
        auto monitored = corpus_monitored_set().expanded();
        for (int i = 0; i < profile.signals; ++i) {
            SignalSpec sig;
            // cycle /24s, vary remote AS to get the requested signal count
            sig.key = SignalKey{monitored[size_t(i) % monitored.size()], 64500u + uint32_t(i / int(monitored.size()))};
            sig.rate_samples_per_s = load / double(profile.signals);
            sc.signals.push_back(sig);
        }
        GeneratedTrace trace = generate(sc);

        DetectorConfig dcfg;
        std::map<SignalKey, SignalState> states;
        int64_t first = trace.samples.empty() ? 0 : trace.samples.front().timestamp_us;
        int64_t origin = (first / dcfg.short_window_us) * dcfg.short_window_us;

        // per tick: total minimum-fold time over the window's samples and
        // total change-comparison time over all signal ticks
        std::vector<double> min_path_us, change_path_us, validation_path_us;
        double window_fold_us = 0;

        int64_t boundary = origin + dcfg.short_window_us;
        for (const RttSample& s : trace.samples) {
            while (s.timestamp_us >= boundary) {
                auto t0 = clock::now();
                for (auto& [key, st] : states) st.tick(dcfg, boundary);
                change_path_us.push_back(std::chrono::duration<double, std::micro>(clock::now() - t0).count());
                min_path_us.push_back(window_fold_us);
                window_fold_us = 0;
                boundary += dcfg.short_window_us;
            }
            auto it = states.find(s.key);
            if (it == states.end())
                it = states.emplace(s.key, SignalState(s.key, boundary - dcfg.short_window_us, dcfg)).first;
            auto t0 = clock::now();
            it->second.observe(s);
            window_fold_us += std::chrono::duration<double, std::micro>(clock::now() - t0).count();
        }

        // validation path: the rank test at its working size
        std::mt19937_64 rng(profile.seed);
        std::exponential_distribution<double> noise(1.0 / 2000.0);
        for (int rep = 0; rep < 1000; ++rep) {
            std::vector<uint32_t> a(20), b(20);
            for (auto& v : a) v = 20000 + uint32_t(noise(rng));
            for (auto& v : b) v = 20000 + uint32_t(noise(rng));
            auto t0 = clock::now();
            mwu_two_sided_p(a, b);
            validation_path_us.push_back(std::chrono::duration<double, std::micro>(clock::now() - t0).count());
        }

        // realtime factor over the full pipeline
        MonitoredPrefixSet mset = corpus_monitored_set();
        PrefixOriginMap omap = corpus_origin_map({sc});
        PipelineConfig pcfg;
        Pipeline pipe(pcfg, &mset, &omap);
        auto w0 = clock::now();
        for (const RttSample& s : trace.samples) pipe.push(s);
        pipe.finish();
        double wall_s = std::chrono::duration<double>(clock::now() - w0).count();

        BenchLoadPoint pt;
        pt.load_samples_per_s = load;
        PathStats m = summarize(min_path_us), c = summarize(change_path_us), v = summarize(validation_path_us);
        pt.minimum_min_us = m.min_us;
        pt.minimum_median_us = m.median_us;
        pt.minimum_max_us = m.max_us;
        pt.change_min_us = c.min_us;
        pt.change_median_us = c.median_us;
        pt.change_max_us = c.max_us;
        pt.validation_min_us = v.min_us;
        pt.validation_median_us = v.median_us;
        pt.validation_max_us = v.max_us;
        pt.realtime_factor = wall_s > 0 ? profile.duration_s / wall_s : 0;
        report.points.push_back(pt);
    }
    return report;
}

BuddyCensus buddy_census(const std::vector<std::pair<std::string, PrefixOriginMap>>& dumps) {
    BuddyCensus census;
    // per prefix (formatted), buddy count per viewpoint
    std::map<std::string, std::vector<int>> counts_by_prefix;

    for (const auto& [name, dump] : dumps) {
        BuddyCensus::Viewpoint vp;
        vp.name = name;
        // group by (origin, full path): identical paths are buddies
        std::map<std::vector<uint32_t>, std::vector<std::string>> groups;
        for (const auto& e : dump.entries()) groups[e.as_path].push_back(format_prefix(e.prefix));
        for (const auto& [path, members] : groups)
            for (const std::string& p : members) vp.buddy_count[p] = int(members.size()) - 1;
        for (const auto& [p, n] : vp.buddy_count) counts_by_prefix[p].push_back(n);
        census.viewpoints.push_back(std::move(vp));
    }

    int max_count = 0;
    for (const auto& [p, v] : counts_by_prefix)
        for (int n : v) max_count = std::max(max_count, n);

    // CCDF per aggregation of each prefix's per-viewpoint counts
    auto ccdf_of = [&](auto&& aggregate) {
        std::vector<double> frac(size_t(max_count) + 1, 0);
        if (counts_by_prefix.empty()) return frac;
        for (int x = 0; x <= max_count; ++x) {
            int hit = 0;
            for (const auto& [p, v] : counts_by_prefix)
                if (aggregate(v) >= x) ++hit;
            frac[size_t(x)] = double(hit) / double(counts_by_prefix.size());
        }
        return frac;
    };
    auto agg_min = [](const std::vector<int>& v) { return *std::min_element(v.begin(), v.end()); };
    auto agg_max = [](const std::vector<int>& v) { return *std::max_element(v.begin(), v.end()); };
    auto agg_median = [](const std::vector<int>& v) {
        std::vector<int> s(v);
        std::sort(s.begin(), s.end());
        return s[(s.size() - 1) / 2];
    };
    auto lo = ccdf_of(agg_min), mid = ccdf_of(agg_median), hi = ccdf_of(agg_max);
    for (int x = 0; x <= max_count; ++x)
        census.ccdf.emplace_back(x, lo[size_t(x)], mid[size_t(x)], hi[size_t(x)]);
    return census;
}

std::string eval_report_csv(const EvalReport& r) {
    std::ostringstream out;
    out << "#v1 metric,value\n";
    out << "tp," << r.tp << "\nfp," << r.fp << "\nfn," << r.fn << "\ntn," << r.tn << "\n";
    out << "precision," << (r.precision ? std::to_string(*r.precision) : "nan") << "\n";
    out << "recall," << (r.recall ? std::to_string(*r.recall) : "nan") << "\n";
    for (const auto& [bin, hits] : r.bin_hits)
        out << "bin" << bin << "_recall,"
            << (hits.second ? std::to_string(double(hits.first) / double(hits.second)) : "nan") << "\n";
    return out.str();
}

std::string delay_cdf_csv(const DelayCdf& c) {
    std::ostringstream out;
    out << "#v1 class,delay_s\n";
    for (double d : c.interception_s) out << "interception," << d << "\n";
    for (double d : c.blackhole_s) out << "blackhole," << d << "\n";
    for (double d : c.non_hijack_s) out << "non_hijack," << d << "\n";
    return out.str();
}

std::string census_ccdf_csv(const BuddyCensus& c) {
    std::ostringstream out;
    out << "#v1 buddies,min_frac,median_frac,max_frac\n";
    for (const auto& [x, lo, mid, hi] : c.ccdf)
        out << x << "," << lo << "," << mid << "," << hi << "\n";
    return out.str();
}

}  // namespace rttwatch
