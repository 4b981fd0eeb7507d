#include <algorithm>
#include <set>
#include <sstream>

#include "doctest.h"
#include "rttwatch/bgpsim.hpp"

using namespace rttwatch;

namespace {

Topology from_text(const std::string& text) {
    std::istringstream in(text);
    return Topology::load_caida(in);
}

std::vector<uint32_t> best_path(const Bgp& bgp, uint32_t node, int prefix = 0) {
    const Route* r = bgp.best(node, prefix);
    REQUIRE(r != nullptr);
    return r->path;
}

}  // namespace

TEST_CASE("relationship files parse, with conflicts and bad lines rejected") {
    Topology t = from_text("# comment\n1|2|-1\n2|3|0\n\n1|2|-1\n");
    CHECK(t.nodes() == std::vector<uint32_t>{1, 2, 3});
    CHECK(t.relation(2, 1) == Rel::Provider);
    CHECK(t.relation(1, 2) == Rel::Customer);
    CHECK(t.relation(2, 3) == Rel::Peer);
    CHECK(t.relation(3, 2) == Rel::Peer);
    CHECK(!t.relation(1, 3).has_value());
    CHECK(t.degree(2) == 2);

    CHECK_THROWS_WITH_AS(from_text("1|2|-1\n2|1|-1\n"), doctest::Contains("line 2"), std::runtime_error);
    CHECK_THROWS_WITH_AS(from_text("1|2|-1\n1|2|0\n"), doctest::Contains("conflict"), std::runtime_error);
    CHECK_THROWS_AS(from_text("5|5|0\n"), std::runtime_error);
    CHECK_THROWS_AS(from_text("1|2|7\n"), std::runtime_error);
    CHECK_THROWS_AS(from_text("1|2\n"), std::runtime_error);

    std::istringstream mon("3\n# c\n1\n");
    t.load_monitors(mon);
    CHECK(t.monitors() == std::vector<uint32_t>{1, 3});  // sorted and deduped
    std::istringstream bad("99\n");
    CHECK_THROWS_AS(t.load_monitors(bad), std::runtime_error);
}

TEST_CASE("route selection prefers relationship class, then length, then tiebreak") {
    Route self{{}, 0, 3, 5};
    Route cust{{7, 8, 9}, 7, 2, 1};
    Route peer{{4, 9}, 4, 1, 0};
    Route prov{{6, 9}, 6, 0, 0};
    CHECK(best_route({&cust, &peer, &prov}) == &cust);     // class beats length
    CHECK(best_route({&self, &cust}) == &self);
    Route cust_short{{5, 9}, 5, 2, 9};
    CHECK(best_route({&cust, &cust_short}) == &cust_short);  // length within class
    Route cust_short2{{3, 9}, 3, 2, 4};
    CHECK(best_route({&cust_short, &cust_short2}) == &cust_short2);  // tiebreak last
    CHECK(best_route({}) == nullptr);
}

TEST_CASE("export policy follows customer/peer/provider rules") {
    for (int pref : {3, 2}) {  // self-originated and customer-learned go everywhere
        CHECK(export_allowed(pref, Rel::Customer));
        CHECK(export_allowed(pref, Rel::Peer));
        CHECK(export_allowed(pref, Rel::Provider));
    }
    for (int pref : {1, 0}) {  // peer/provider-learned go only to customers
        CHECK(export_allowed(pref, Rel::Customer));
        CHECK(!export_allowed(pref, Rel::Peer));
        CHECK(!export_allowed(pref, Rel::Provider));
    }
}

TEST_CASE("reference topology converges to the hand-checked routes") {
    Topology topo = reference_topology();
    CHECK(topo.monitors() == std::vector<uint32_t>{31, 32});
    Bgp bgp(topo);
    bgp.originate(1, 0);
    bgp.run();

    CHECK(best_path(bgp, 11) == std::vector<uint32_t>{1});
    CHECK(best_path(bgp, 12) == std::vector<uint32_t>{1});
    CHECK(best_path(bgp, 21) == std::vector<uint32_t>{12, 1});
    CHECK(best_path(bgp, 31) == std::vector<uint32_t>{21, 12, 1});
    CHECK(best_path(bgp, 41) == std::vector<uint32_t>{31, 21, 12, 1});
    CHECK(best_path(bgp, 32) == std::vector<uint32_t>{41, 31, 21, 12, 1});
    CHECK(best_path(bgp, 22) == std::vector<uint32_t>{31, 21, 12, 1});
    CHECK(best_path(bgp, 66) == std::vector<uint32_t>{11, 1});

    // every converged path is valley-free and loop-free
    for (uint32_t n : topo.nodes()) {
        if (n == 1) continue;
        std::vector<uint32_t> p = best_path(bgp, n);
        CHECK(valley_free(topo, n, p));
        std::set<uint32_t> seen(p.begin(), p.end());
        CHECK(seen.size() == p.size());
        CHECK(!seen.count(n));
    }
}

TEST_CASE("a shorter peer-learned injection flips a provider-routed node") {
    Topology topo = reference_topology();
    Bgp bgp(topo);
    bgp.originate(1, 0);
    bgp.run();
    Bgp attacked = bgp;
    // hijacker 66 sends its own best path onward to its peer 41
    attacked.inject(66, 41, 0, {66, 11, 1});
    attacked.run();
    CHECK(best_path(attacked, 41) == std::vector<uint32_t>{66, 11, 1});  // peer beats provider
    // 41 then prefers the peer route and re-exports only to customers
    CHECK(best_path(attacked, 32) == std::vector<uint32_t>{41, 66, 11, 1});
    CHECK(best_path(attacked, 31) == std::vector<uint32_t>{21, 12, 1});  // unchanged
}

TEST_CASE("loops are dropped on receive and prior state is kept") {
    Topology topo = reference_topology();
    Bgp bgp(topo);
    bgp.originate(1, 0);
    bgp.run();
    uint64_t drops = bgp.loop_drops();
    Bgp attacked = bgp;
    attacked.inject(41, 32, 0, {41, 32, 11, 1});  // path already contains the receiver
    attacked.run();
    CHECK(attacked.loop_drops() == drops + 1);
    CHECK(best_path(attacked, 32) == std::vector<uint32_t>{41, 31, 21, 12, 1});
    // the old per-neighbor entry survives too
    REQUIRE(attacked.rib_entry(32, 0, 41) != nullptr);
    CHECK(attacked.rib_entry(32, 0, 41)->path == std::vector<uint32_t>{41, 31, 21, 12, 1});
}

TEST_CASE("valley-free accepts up-peer-down and rejects valleys") {
    Topology topo = reference_topology();
    // 41's real path: provider 31, then 21 is 31's provider... walk checks stages
    CHECK(valley_free(topo, 41, {31, 21, 12, 1}));   // up, up, down, down
    CHECK(valley_free(topo, 66, {11, 1}));           // up then down
    CHECK(valley_free(topo, 41, {66}));              // single peer hop
    CHECK(valley_free(topo, 22, {41, 66}));          // up then peer
    CHECK(!valley_free(topo, 41, {66, 11, 1}));      // climbing again after the peer link
    CHECK(!valley_free(topo, 31, {41, 66, 11, 1}));  // down to a customer, then its peer
    CHECK(!valley_free(topo, 12, {21, 31, 41, 66})); // descending then ascending
    CHECK(!valley_free(topo, 41, {31, 99}));         // non-edge
}

TEST_CASE("dangerous monitors come from the path-length estimate") {
    std::map<uint32_t, std::vector<uint32_t>> victim_views{
        {31, {21, 12, 1}},           // 3 hops to the victim
        {32, {41, 31, 21, 12, 1}},   // 5 hops
    };
    std::map<uint32_t, std::vector<uint32_t>> probe_views{
        {31, {21, 66}},       // 2 hops to the hijacker: estimate 1 + crafted
        {32, {41, 66}},       // 2 hops
    };
    // crafted 4 hops: 31 estimates 1+4=5 > 3 safe; 32 estimates 5 <= 5 dangerous
    bool missing = false;
    CHECK(dangerous_monitors({66, 32, 11, 1}, victim_views, probe_views, &missing) ==
          std::vector<uint32_t>{32});
    CHECK(!missing);
    // crafted 3 hops endangers nobody at 31 (1+3=4 > 3)? no: 4 > 3 safe, 32: 4 <= 5 dangerous
    CHECK(dangerous_monitors({66, 11, 1}, victim_views, probe_views) == std::vector<uint32_t>{32});
    // a monitor with no victim view never qualifies
    victim_views.erase(32);
    CHECK(dangerous_monitors({66, 11, 1}, victim_views, probe_views).empty());
    // a monitor with a victim view but no probe view is skipped and flagged
    victim_views[32] = {41, 31, 21, 12, 1};
    probe_views.erase(32);
    CHECK(dangerous_monitors({66, 11, 1}, victim_views, probe_views, &missing).empty());
    CHECK(missing);
}

TEST_CASE("the stealthy plan on the reference topology matches the worked example") {
    Topology topo = reference_topology();
    Bgp legit(topo);
    legit.originate(1, 0);
    legit.run();
    StealthyPlan plan = craft_stealthy(topo, legit, 66, 1, 0, topo.monitors());
    REQUIRE(plan.feasible);
    // monitor 31 never hears the probe sent toward peer 41 (peers do not
    // re-export upward), so the estimate for that neighbor is flagged
    CHECK(plan.estimate_flagged);
    // the return route goes via 11, so 11 is skipped
    CHECK(plan.skipped_neighbors == std::vector<uint32_t>{11});
    REQUIRE(plan.announcements.size() == 2);
    // neighbors in ascending order: 21 gets the unpoisoned base, 41 gets 32 poisoned in
    CHECK(plan.announcements[0].neighbor == 21);
    CHECK(plan.announcements[0].path == std::vector<uint32_t>{66, 11, 1});
    CHECK(plan.announcements[0].dangerous.empty());
    CHECK(plan.announcements[1].neighbor == 41);
    CHECK(plan.announcements[1].path == std::vector<uint32_t>{66, 32, 11, 1});
    CHECK(plan.announcements[1].dangerous == std::vector<uint32_t>{32});
}

TEST_CASE("naive is visible on the reference topology, stealthy is not") {
    Topology topo = reference_topology();
    ExperimentResult r = run_pair(topo, 1, 66, 1.0, 7);
    CHECK(r.pair_valid);
    CHECK(naive_path(66, 1) == std::vector<uint32_t>{66, 1, 1, 1, 1});
    CHECK(r.naive.visible);
    CHECK(r.naive.affected_count == 2);  // 41 flips; 32 follows it
    CHECK(r.naive.monitor_paths.at(32) == std::vector<uint32_t>{41, 66, 1, 1, 1, 1});
    CHECK(!r.smart.visible);
    CHECK(r.smart.affected_count == 1);  // only 41
    CHECK(r.smart.monitor_paths.at(31) == std::vector<uint32_t>{21, 12, 1});
    CHECK(r.smart.monitor_paths.at(32) == std::vector<uint32_t>{41, 31, 21, 12, 1});
}

TEST_CASE("doubling the monitors turns the stealthy attempt into a failure") {
    Topology topo = reference_topology();
    ExperimentResult r = run_pair(topo, 1, 66, 2.0, 7);
    // with 41 itself a monitor the crafted route must poison it, so 41
    // drops the announcement: nobody is attracted and the attempt fails
    CHECK(r.smart.affected_count == 0);
    CHECK(r.smart.visible);
    CHECK(r.naive.visible);
}

TEST_CASE("monitor placement is by degree and grows as a superset") {
    Topology topo = synthetic_topology(300, 11);
    std::vector<uint32_t> m5 = place_monitors(topo, 5);
    std::vector<uint32_t> m20 = place_monitors(topo, 20);
    CHECK(m5.size() == 5);
    CHECK(m20.size() == 20);
    for (uint32_t m : m5) CHECK(std::find(m20.begin(), m20.end(), m) != m20.end());
    int min_deg = 1 << 30;
    for (uint32_t m : m20) min_deg = std::min(min_deg, topo.degree(m));
    int outside_max = 0;
    for (uint32_t n : topo.nodes())
        if (std::find(m20.begin(), m20.end(), n) == m20.end()) outside_max = std::max(outside_max, topo.degree(n));
    CHECK(min_deg >= outside_max);
}

TEST_CASE("synthetic topologies are connected, deterministic, and policy-clean") {
    Topology a = synthetic_topology(200, 3);
    Topology b = synthetic_topology(200, 3);
    CHECK(a.nodes() == b.nodes());
    for (uint32_t n : a.nodes()) CHECK(a.neighbors(n).size() == b.neighbors(n).size());

    // providers have lower ASNs: customer->provider edges never descend
    for (uint32_t n : a.nodes())
        for (const Topology::Neighbor& nb : a.neighbors(n))
            if (nb.rel == Rel::Provider) CHECK(nb.as < n);

    // an origination from the lowest node reaches everyone, valley-free
    a.set_seed(5);
    Bgp bgp(a);
    uint32_t origin = a.nodes().front();
    bgp.originate(origin, 0);
    bgp.run();
    for (uint32_t n : a.nodes()) {
        if (n == origin) continue;
        const Route* r = bgp.best(n, 0);
        REQUIRE(r != nullptr);
        CHECK(valley_free(a, n, r->path));
        std::set<uint32_t> seen(r->path.begin(), r->path.end());
        CHECK(seen.size() == r->path.size());
    }
    CHECK(bgp.best_changes() <= bgp.updates_processed());
}

TEST_CASE("experiments run end to end and serialize to CSV") {
    Topology topo = synthetic_topology(300, 11);
    topo.set_monitors(place_monitors(topo, 10));
    std::vector<ExperimentResult> results;
    int valid = 0;
    for (uint64_t seed = 1; seed <= 8; ++seed) {
        ExperimentResult r = run_experiment(topo, seed);
        ExperimentResult again = run_experiment(topo, seed);
        CHECK(r.victim == again.victim);
        CHECK(r.hijacker == again.hijacker);
        CHECK(r.naive.visible == again.naive.visible);
        CHECK(r.smart.visible == again.smart.visible);
        if (r.pair_valid) {
            ++valid;
            CHECK(r.victim != r.hijacker);
            CHECK(topo.has_node(r.victim));
            results.push_back(r);
        }
    }
    CHECK(valid > 0);
    std::string csv = experiments_csv(results);
    CHECK(csv.substr(0, 3) == "#v1");
    CHECK(csv.find("seed,strategy,visible,affected_count,monitor_scale") != std::string::npos);
    size_t lines = std::count(csv.begin(), csv.end(), '\n');
    CHECK(lines == results.size() * 2 + 1);  // header + one row per strategy
}

TEST_CASE("extra monitors never help the naive attacker") {
    Topology topo = synthetic_topology(400, 17);
    topo.set_monitors(place_monitors(topo, 4));
    int caught_x1 = 0, caught_x5 = 0, n = 0;
    for (uint64_t seed = 1; seed <= 12; ++seed) {
        ExperimentResult r1 = run_experiment(topo, seed, 1.0);
        ExperimentResult r5 = run_experiment(topo, seed, 5.0);
        if (!r1.pair_valid || !r5.pair_valid) continue;
        ++n;
        caught_x1 += r1.naive.visible;
        caught_x5 += r5.naive.visible;
        // superset monitors: anything visible at x1 stays visible at x5
        if (r1.naive.visible) CHECK(r5.naive.visible);
    }
    CHECK(n > 0);
    CHECK(caught_x5 >= caught_x1);
}
