#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rttwatch/bgpsim.hpp"
#include "rttwatch/eval.hpp"
#include "rttwatch/pipeline.hpp"
#include "rttwatch/tracegen.hpp"

using namespace rttwatch;

namespace {

struct CliConfig {
    double threshold_ms = 3;
    double short_window_s = 1;
    int long_window_k = 4;
    int buddies = 3;
    int samples = 20;
    double alpha = 0.05;
    int validations = 2;  // repetitions; 0 disables validation
    std::string vote = "unanimous";
    double timeout_s = 30;
    uint64_t seed = 42;
    double monitor_scale = 1;
    int workers = 1;
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spill(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << text;
}

// --config JSON provides defaults; explicit flags win.
void load_config_file(const std::string& path, CliConfig& c) {
    auto j = nlohmann::json::parse(slurp(path));
    c.threshold_ms = j.value("threshold_ms", c.threshold_ms);
    c.short_window_s = j.value("short_window_s", c.short_window_s);
    c.long_window_k = j.value("long_window_k", c.long_window_k);
    c.buddies = j.value("buddies", c.buddies);
    c.samples = j.value("samples", c.samples);
    c.alpha = j.value("alpha", c.alpha);
    c.validations = j.value("validations", c.validations);
    c.vote = j.value("vote", c.vote);
    c.timeout_s = j.value("timeout_s", c.timeout_s);
    c.seed = j.value("seed", c.seed);
    c.monitor_scale = j.value("monitor_scale", c.monitor_scale);
    c.workers = j.value("workers", c.workers);
}

PipelineConfig pipeline_config(const CliConfig& c) {
    PipelineConfig cfg;
    cfg.detector.threshold_us = int64_t(c.threshold_ms * 1000);
    cfg.detector.short_window_us = int64_t(c.short_window_s * 1e6);
    cfg.detector.long_window_k = c.long_window_k;
    cfg.validation.num_buddies = c.buddies;
    cfg.validation.samples_per_side = c.samples;
    cfg.validation.alpha = c.alpha;
    cfg.validation.repetitions = std::max(1, c.validations);
    if (c.vote != "unanimous" && c.vote != "majority") throw std::runtime_error("--vote: unanimous or majority");
    cfg.validation.vote_mode = c.vote == "majority" ? VoteMode::Majority : VoteMode::Unanimous;
    cfg.validation.collection_timeout_us = int64_t(c.timeout_s * 1e6);
    cfg.validation_enabled = c.validations > 0;
    cfg.workers = c.workers;
    return cfg;
}

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::Hijack: return "hijack";
        case Outcome::Benign: return "benign";
        case Outcome::Inconclusive: return "inconclusive";
    }
    return "?";
}

std::string alert_line(const Verdict& v) {
    nlohmann::json j;
    j["kind"] = v.event.kind == EventKind::RttChange ? "rtt_change" : "blackhole_suspect";
    j["prefix"] = format_prefix24(v.event.key.local_prefix);
    j["remote_as"] = v.event.key.remote_as;
    if (v.event.kind == EventKind::RttChange) {
        j["direction"] = v.event.direction == ChangeDirection::Up ? "up" : "down";
        j["magnitude_us"] = v.event.magnitude_us;
    }
    j["t_detect_us"] = v.event.t_detect_us;
    j["outcome"] = outcome_name(v.outcome);
    j["t_classified_us"] = v.t_classified_us;
    return j.dump();
}

int cmd_detect(const CliConfig& c, const std::string& trace_path, const std::string& monitored_path,
               const std::string& origin_path, const std::string& out_path, const std::string& registry_path) {
    std::ifstream mon_in(monitored_path);
    if (!mon_in) throw std::runtime_error("cannot read " + monitored_path);
    MonitoredPrefixSet monitored = MonitoredPrefixSet::load(mon_in);
    std::ifstream map_in(origin_path);
    if (!map_in) throw std::runtime_error("cannot read " + origin_path);
    PrefixOriginMap origins = PrefixOriginMap::load(map_in);

    Pipeline pipe(pipeline_config(c), &monitored, &origins);
    if (!registry_path.empty() && std::filesystem::exists(registry_path))
        pipe.registry() = BuddyRegistry::deserialize(slurp(registry_path));

    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (trace_path != "-") {
        file_in.open(trace_path);
        if (!file_in) throw std::runtime_error("cannot read " + trace_path);
        in = &file_in;
    }
    std::string line;
    size_t lineno = 0, bad = 0;
    while (std::getline(*in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto raw = parse_trace_line(line);
        if (!raw) {
            ++bad;
            continue;
        }
        pipe.push_raw(*raw);
    }
    pipe.finish();

    std::vector<Verdict> alerts = pipe.verdicts();
    std::stable_sort(alerts.begin(), alerts.end(),
                     [](const Verdict& a, const Verdict& b) { return a.t_classified_us < b.t_classified_us; });
    std::ostringstream out;
    for (const Verdict& v : alerts) out << alert_line(v) << "\n";
    if (out_path.empty() || out_path == "-")
        std::cout << out.str();
    else
        spill(out_path, out.str());

    if (!registry_path.empty()) spill(registry_path, pipe.registry().serialize());

    const PipelineStats& st = pipe.stats();
    std::cerr << "samples " << st.samples_in << " accepted " << st.samples_accepted << " alerts " << alerts.size()
              << " malformed-lines " << bad << "\n";
    return 0;
}

std::string monitored_text(const MonitoredPrefixSet& set) {
    std::ostringstream out;
    for (Prefix24 p : set.expanded()) out << format_prefix24(p) << "\n";
    return out.str();
}

std::string origin_text(const PrefixOriginMap& map) {
    std::ostringstream out;
    for (const auto& e : map.entries()) {
        out << format_prefix(e.prefix) << "\t";
        for (size_t i = 0; i < e.as_path.size(); ++i) out << (i ? " " : "") << e.as_path[i];
        out << "\n";
    }
    return out.str();
}

int cmd_generate(const CliConfig& c, const std::string& scenario_path, bool whole_corpus,
                 const std::string& out_dir, const std::string& trace_out, const std::string& truth_out) {
    if (whole_corpus) {
        CorpusProfile profile;
        profile.seed = c.seed;
        std::vector<Scenario> scenarios = corpus(profile);
        std::filesystem::create_directories(out_dir);
        spill(out_dir + "/monitored.txt", monitored_text(corpus_monitored_set()));
        spill(out_dir + "/origins.map", origin_text(corpus_origin_map(scenarios)));
        for (const Scenario& sc : scenarios) {
            GeneratedTrace trace = generate(sc);
            std::ostringstream nd;
            for (const RttSample& s : trace.samples) nd << format_trace_line(to_raw(s, sc.seed)) << "\n";
            spill(out_dir + "/" + sc.name + ".trace.ndjson", nd.str());
            spill(out_dir + "/" + sc.name + ".truth.json", truth_to_json(trace.truth));
            spill(out_dir + "/" + sc.name + ".scenario.json", scenario_to_json(sc));
        }
        std::cerr << "wrote " << scenarios.size() << " scenarios to " << out_dir << "\n";
        return 0;
    }
    Scenario sc = scenario_from_json(slurp(scenario_path));
    GeneratedTrace trace = generate(sc);
    std::ostringstream nd;
    for (const RttSample& s : trace.samples) nd << format_trace_line(to_raw(s, sc.seed)) << "\n";
    spill(trace_out, nd.str());
    spill(truth_out, truth_to_json(trace.truth));
    std::cerr << "wrote " << trace.samples.size() << " samples\n";
    return 0;
}

int cmd_simulate(const CliConfig& c, const std::string& topology_path, const std::string& monitors_path,
                 int synthetic_nodes, int place, int runs, const std::string& out_path, bool use_reference) {
    Topology topo;
    if (use_reference) {
        topo = reference_topology();
    } else if (synthetic_nodes > 0) {
        topo = synthetic_topology(synthetic_nodes, c.seed);
    } else {
        std::ifstream in(topology_path);
        if (!in) throw std::runtime_error("cannot read " + topology_path);
        topo = Topology::load_caida(in);
    }
    topo.set_seed(c.seed);
    if (!monitors_path.empty()) {
        std::ifstream in(monitors_path);
        if (!in) throw std::runtime_error("cannot read " + monitors_path);
        topo.load_monitors(in);
    } else if (place > 0) {
        topo.set_monitors(place_monitors(topo, size_t(place)));
    }
    if (topo.monitors().empty()) throw std::runtime_error("no monitors: pass --monitors or --place");

    std::vector<ExperimentResult> results;
    for (int i = 0; i < runs; ++i) results.push_back(run_experiment(topo, c.seed + uint64_t(i), c.monitor_scale));
    std::string csv = experiments_csv(results);
    if (out_path.empty() || out_path == "-")
        std::cout << csv;
    else
        spill(out_path, csv);
    return 0;
}

int cmd_evaluate(const CliConfig& c, const std::string& out_prefix) {
    CorpusProfile profile;
    profile.seed = c.seed;
    std::vector<Scenario> scenarios = corpus(profile);
    std::vector<ScenarioResult> results = run_corpus(scenarios, pipeline_config(c), std::max(1, c.workers));
    EvalConfig ecfg;
    EvalReport report = score(results, ecfg);
    DelayCdf cdf = delay_cdf(results, ecfg);
    std::string report_csv = eval_report_csv(report);
    std::string cdf_csv = delay_cdf_csv(cdf);
    if (out_prefix.empty()) {
        std::cout << report_csv << "\n" << cdf_csv;
    } else {
        spill(out_prefix + "report.csv", report_csv);
        spill(out_prefix + "delays.csv", cdf_csv);
    }
    return 0;
}

int cmd_bench(const CliConfig& c, std::vector<double> loads, int signals, double duration_s) {
    BenchProfile profile;
    if (!loads.empty()) profile.loads_samples_per_s = loads;
    profile.signals = signals;
    profile.duration_s = duration_s;
    profile.seed = c.seed;
    BenchReport report = bench(profile);
    std::cout << "#v1 load,min_fold_median_us,change_median_us,validation_median_us,realtime_factor\n";
    for (const BenchLoadPoint& p : report.points)
        std::cout << p.load_samples_per_s << "," << p.minimum_median_us << "," << p.change_median_us << ","
                  << p.validation_median_us << "," << p.realtime_factor << "\n";
    return 0;
}

int cmd_clear_blacklist(const std::string& registry_path, const std::string& prefix_text, uint32_t remote_as) {
    auto p = parse_prefix(prefix_text);
    if (!p || p->len != 24) throw std::runtime_error("--prefix must be a /24");
    BuddyRegistry reg = BuddyRegistry::deserialize(slurp(registry_path));
    SignalKey key{Prefix24{p->base}, remote_as};
    if (!reg.clear_blacklist(key)) {
        std::cerr << prefix_text << " AS" << remote_as << " is not blacklisted\n";
        return 1;
    }
    spill(registry_path, reg.serialize());
    std::cerr << "cleared " << prefix_text << " AS" << remote_as << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CliConfig cfg;
    // --config supplies defaults, so read it before the regular parse
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                load_config_file(argv[i + 1], cfg);
            } catch (const std::exception& ex) {
                std::cerr << "error: " << ex.what() << "\n";
                return 1;
            }
        }
    }

    CLI::App app{"RTT-based hijack detection toolkit"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file; explicit flags override it");

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--threshold-ms", cfg.threshold_ms, "change threshold");
        sub->add_option("--short-window-s", cfg.short_window_s, "short window length");
        sub->add_option("--long-window-k", cfg.long_window_k, "long window width in short windows");
        sub->add_option("--buddies", cfg.buddies, "buddies per validation");
        sub->add_option("--samples", cfg.samples, "samples per side for the rank test");
        sub->add_option("--alpha", cfg.alpha, "rank test confidence level");
        sub->add_option("--validations", cfg.validations, "validation repetitions; 0 disables validation");
        sub->add_option("--vote", cfg.vote, "unanimous|majority");
        sub->add_option("--timeout-s", cfg.timeout_s, "validation collection timeout");
        sub->add_option("--seed", cfg.seed, "run seed");
        sub->add_option("--monitor-scale", cfg.monitor_scale, "monitor count multiplier");
        sub->add_option("--workers", cfg.workers, "worker threads");
    };

    auto* detect = app.add_subcommand("detect", "run detection over an NDJSON trace");
    std::string trace_path = "-", monitored_path, origin_path, out_path, registry_path;
    detect->add_option("--trace", trace_path, "trace NDJSON file, - for stdin");
    detect->add_option("--monitored", monitored_path, "monitored prefix list")->required();
    detect->add_option("--origin-map", origin_path, "prefix -> AS path map")->required();
    detect->add_option("--out", out_path, "alert NDJSON output, - for stdout");
    detect->add_option("--registry", registry_path, "persisted registry JSON (loaded and saved)");
    add_common(detect);

    auto* generate_cmd = app.add_subcommand("generate", "generate synthetic traces with ground truth");
    std::string scenario_path, out_dir = "corpus", trace_out = "trace.ndjson", truth_out = "truth.json";
    bool whole_corpus = false;
    generate_cmd->add_option("--scenario", scenario_path, "scenario JSON");
    generate_cmd->add_flag("--corpus", whole_corpus, "generate the full default corpus");
    generate_cmd->add_option("--out-dir", out_dir, "corpus output directory");
    generate_cmd->add_option("--trace", trace_out, "trace output (single scenario)");
    generate_cmd->add_option("--truth", truth_out, "truth output (single scenario)");
    add_common(generate_cmd);

    auto* simulate = app.add_subcommand("simulate", "run hijack experiments on an AS topology");
    std::string topology_path, monitors_path, sim_out;
    int synthetic_nodes = 0, place = 0, runs = 100;
    bool use_reference = false;
    simulate->add_option("--topology", topology_path, "relationship file asn1|asn2|rel");
    simulate->add_option("--monitors", monitors_path, "monitor ASN list");
    simulate->add_option("--synthetic", synthetic_nodes, "use a synthetic topology of this size");
    simulate->add_flag("--reference", use_reference, "use the built-in nine-AS fixture");
    simulate->add_option("--place", place, "place this many monitors by degree");
    simulate->add_option("--runs", runs, "experiment count");
    simulate->add_option("--out", sim_out, "CSV output, - for stdout");
    add_common(simulate);

    auto* evaluate = app.add_subcommand("evaluate", "run the default corpus and report accuracy");
    std::string out_prefix;
    evaluate->add_option("--out-prefix", out_prefix, "write <prefix>report.csv and <prefix>delays.csv");
    add_common(evaluate);

    auto* bench_cmd = app.add_subcommand("bench", "time the hot paths at several loads");
    std::vector<double> loads;
    int bench_signals = 500;
    double bench_duration = 30;
    bench_cmd->add_option("--loads", loads, "samples/s load points");
    bench_cmd->add_option("--signals", bench_signals, "concurrent signals");
    bench_cmd->add_option("--duration-s", bench_duration, "trace length per load point");
    add_common(bench_cmd);

    auto* clear = app.add_subcommand("clear-blacklist", "remove one (prefix, AS) from a registry file");
    std::string clear_registry, clear_prefix;
    uint32_t clear_as = 0;
    clear->add_option("--registry", clear_registry, "registry JSON file")->required();
    clear->add_option("--prefix", clear_prefix, "/24 prefix")->required();
    clear->add_option("--as", clear_as, "remote AS")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (detect->parsed()) return cmd_detect(cfg, trace_path, monitored_path, origin_path, out_path, registry_path);
        if (generate_cmd->parsed()) {
            if (!whole_corpus && scenario_path.empty()) throw std::runtime_error("pass --scenario or --corpus");
            return cmd_generate(cfg, scenario_path, whole_corpus, out_dir, trace_out, truth_out);
        }
        if (simulate->parsed())
            return cmd_simulate(cfg, topology_path, monitors_path, synthetic_nodes, place, runs, sim_out,
                                use_reference);
        if (evaluate->parsed()) return cmd_evaluate(cfg, out_prefix);
        if (bench_cmd->parsed()) return cmd_bench(cfg, loads, bench_signals, bench_duration);
        if (clear->parsed()) return cmd_clear_blacklist(clear_registry, clear_prefix, clear_as);
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
    return 0;
}
