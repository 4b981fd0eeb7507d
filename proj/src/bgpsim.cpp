#include "rttwatch/bgpsim.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

namespace rttwatch {

namespace {

uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

bool contains(const std::vector<uint32_t>& v, uint32_t x) {
    return std::find(v.begin(), v.end(), x) != v.end();
}

Rel flip(Rel r) {
    if (r == Rel::Customer) return Rel::Provider;
    if (r == Rel::Provider) return Rel::Customer;
    return Rel::Peer;
}

}  // namespace

// ---- Topology ----

Topology Topology::load_caida(std::istream& in) {
    Topology t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        // trim
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        std::string body = line.substr(b, e - b + 1);

        std::istringstream ss(body);
        std::string f1, f2, f3;
        if (!std::getline(ss, f1, '|') || !std::getline(ss, f2, '|') || !std::getline(ss, f3, '|'))
            throw std::runtime_error("relationship file line " + std::to_string(lineno) + ": expected asn1|asn2|rel");
        try {
            uint32_t a = uint32_t(std::stoul(f1));
            uint32_t b2 = uint32_t(std::stoul(f2));
            int rel = std::stoi(f3);
            t.add_edge(a, b2, rel);
        } catch (const std::runtime_error& ex) {
            throw std::runtime_error("relationship file line " + std::to_string(lineno) + ": " + ex.what());
        } catch (const std::exception&) {
            throw std::runtime_error("relationship file line " + std::to_string(lineno) + ": bad number in " + body);
        }
    }
    return t;
}

void Topology::add_edge(uint32_t a, uint32_t b, int rel_code) {
    if (a == b) throw std::runtime_error("self-edge on AS " + std::to_string(a));
    if (rel_code != -1 && rel_code != 0)
        throw std::runtime_error("unknown relationship code " + std::to_string(rel_code));

    // -1: a provider of b; 0: peers. rel stored from each endpoint's view.
    Rel b_from_a = rel_code == 0 ? Rel::Peer : Rel::Customer;
    auto existing = relation(a, b);
    if (existing) {
        if (*existing != b_from_a)
            throw std::runtime_error("conflicting relationship for edge " + std::to_string(a) + "|" + std::to_string(b));
        return;  // consistent duplicate
    }
    adj_[a].push_back(Neighbor{b, b_from_a});
    adj_[b].push_back(Neighbor{a, flip(b_from_a)});
    std::sort(adj_[a].begin(), adj_[a].end(), [](const Neighbor& x, const Neighbor& y) { return x.as < y.as; });
    std::sort(adj_[b].begin(), adj_[b].end(), [](const Neighbor& x, const Neighbor& y) { return x.as < y.as; });
    nodes_dirty_ = true;
}

void Topology::load_monitors(std::istream& in) {
    std::vector<uint32_t> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        auto e = line.find_last_not_of(" \t\r");
        uint32_t as;
        try {
            as = uint32_t(std::stoul(line.substr(b, e - b + 1)));
        } catch (const std::exception&) {
            throw std::runtime_error("monitor file line " + std::to_string(lineno) + ": bad ASN");
        }
        if (!has_node(as))
            throw std::runtime_error("monitor file line " + std::to_string(lineno) + ": AS " + std::to_string(as) +
                                     " not in topology");
        out.push_back(as);
    }
    set_monitors(std::move(out));
}

void Topology::set_monitors(std::vector<uint32_t> monitors) {
    std::sort(monitors.begin(), monitors.end());
    monitors.erase(std::unique(monitors.begin(), monitors.end()), monitors.end());
    for (uint32_t m : monitors)
        if (!has_node(m)) throw std::runtime_error("monitor AS " + std::to_string(m) + " not in topology");
    monitors_ = std::move(monitors);
}

const std::vector<uint32_t>& Topology::nodes() const {
    if (nodes_dirty_) {
        nodes_cache_.clear();
        for (const auto& [as, nbrs] : adj_) nodes_cache_.push_back(as);
        std::sort(nodes_cache_.begin(), nodes_cache_.end());
        nodes_dirty_ = false;
    }
    return nodes_cache_;
}

const std::vector<Topology::Neighbor>& Topology::neighbors(uint32_t as) const {
    static const std::vector<Neighbor> empty;
    auto it = adj_.find(as);
    return it == adj_.end() ? empty : it->second;
}

std::optional<Rel> Topology::relation(uint32_t node, uint32_t other) const {
    for (const Neighbor& n : neighbors(node))
        if (n.as == other) return n.rel;
    return std::nullopt;
}

int Topology::degree(uint32_t as) const { return int(neighbors(as).size()); }

uint64_t Topology::tiebreak(uint32_t node, uint32_t neighbor) const {
    return mix64(seed_ ^ (uint64_t(node) << 32 | neighbor));
}

// ---- route selection & export policy ----

const Route* best_route(const std::vector<const Route*>& candidates) {
    const Route* best = nullptr;
    for (const Route* r : candidates) {
        if (!r) continue;
        if (!best) {
            best = r;
            continue;
        }
        if (r->pref != best->pref) {
            if (r->pref > best->pref) best = r;
        } else if (r->path.size() != best->path.size()) {
            if (r->path.size() < best->path.size()) best = r;
        } else if (r->tiebreak < best->tiebreak) {
            best = r;
        }
    }
    return best;
}

bool export_allowed(int route_pref, Rel to_neighbor) {
    if (route_pref >= 2) return true;  // self-originated or customer-learned
    return to_neighbor == Rel::Customer;
}

// ---- propagation ----

void Bgp::originate(uint32_t node, int prefix) {
    if (!topo_->has_node(node)) throw std::runtime_error("originate: unknown AS");
    max_prefix_ = std::max(max_prefix_, prefix);
    NodeState& st = state_[node];
    st.rib_in[prefix][node] = Route{{}, node, 3, 0};
    st.best[prefix] = st.rib_in[prefix][node];
    ++best_changes_;
    export_best(node, prefix);
}

void Bgp::inject(uint32_t from, uint32_t to, int prefix, std::vector<uint32_t> path_as_sent) {
    if (!topo_->relation(to, from)) throw std::runtime_error("inject: no edge between sender and receiver");
    max_prefix_ = std::max(max_prefix_, prefix);
    queue_.push_back(Msg{from, to, prefix, std::move(path_as_sent)});
}

void Bgp::export_best(uint32_t node, int prefix) {
    const Route& best = state_[node].best[prefix];
    std::vector<uint32_t> sent;
    sent.reserve(best.path.size() + 1);
    sent.push_back(node);
    sent.insert(sent.end(), best.path.begin(), best.path.end());
    for (const Topology::Neighbor& n : topo_->neighbors(node))
        if (export_allowed(best.pref, n.rel)) queue_.push_back(Msg{node, n.as, prefix, sent});
}

void Bgp::deliver(const Msg& m) {
    if (contains(m.path, m.to)) {
        ++loop_drops_;  // advertisement carries the receiver: ignore, keep the old entry
        return;
    }
    Rel rel = *topo_->relation(m.to, m.from);
    int pref = rel == Rel::Customer ? 2 : rel == Rel::Peer ? 1 : 0;
    NodeState& st = state_[m.to];
    st.rib_in[m.prefix][m.from] = Route{m.path, m.from, pref, topo_->tiebreak(m.to, m.from)};

    std::vector<const Route*> cands;
    for (const auto& [nbr, r] : st.rib_in[m.prefix]) cands.push_back(&r);
    const Route* nb = best_route(cands);

    auto it = st.best.find(m.prefix);
    bool changed = it == st.best.end() || it->second.learned_from != nb->learned_from || it->second.path != nb->path;
    if (!changed) return;
    st.best[m.prefix] = *nb;
    ++best_changes_;
    export_best(m.to, m.prefix);
}

void Bgp::run() {
    // loose bound: each node can improve its best route only a bounded
    // number of times per prefix under customer/peer/provider policies
    uint64_t cap = 1000ULL * (topo_->nodes().size() + 1) * uint64_t(max_prefix_ + 2) + 100000ULL;
    uint64_t steps = 0;
    while (!queue_.empty()) {
        if (++steps > cap)
            throw std::runtime_error("propagation exceeded " + std::to_string(cap) +
                                     " updates without converging (non-compliant policy?)");
        Msg m = std::move(queue_.front());
        queue_.pop_front();
        ++processed_;
        deliver(m);
    }
}

const Route* Bgp::best(uint32_t node, int prefix) const {
    auto s = state_.find(node);
    if (s == state_.end()) return nullptr;
    auto it = s->second.best.find(prefix);
    return it == s->second.best.end() ? nullptr : &it->second;
}

const Route* Bgp::rib_entry(uint32_t node, int prefix, uint32_t from) const {
    auto s = state_.find(node);
    if (s == state_.end()) return nullptr;
    auto p = s->second.rib_in.find(prefix);
    if (p == s->second.rib_in.end()) return nullptr;
    auto it = p->second.find(from);
    return it == p->second.end() ? nullptr : &it->second;
}

bool valley_free(const Topology& topo, uint32_t owner, const std::vector<uint32_t>& path) {
    // walk owner -> path[0] -> ... -> origin; allowed shape is
    // Provider* Peer? Customer*
    int stage = 0;  // 0 climbing, 1 after peer, 2 descending
    uint32_t at = owner;
    for (uint32_t next : path) {
        auto rel = topo.relation(at, next);
        if (!rel) return false;  // not even a real link
        switch (*rel) {
            case Rel::Provider:
                if (stage != 0) return false;
                break;
            case Rel::Peer:
                if (stage != 0) return false;
                stage = 1;
                break;
            case Rel::Customer:
                stage = 2;
                break;
        }
        at = next;
    }
    return true;
}

// ---- hijack strategies ----

std::vector<uint32_t> dangerous_monitors(const std::vector<uint32_t>& crafted_path,
                                         const std::map<uint32_t, std::vector<uint32_t>>& victim_views,
                                         const std::map<uint32_t, std::vector<uint32_t>>& probe_views,
                                         bool* missing_probe_view) {
    std::vector<uint32_t> out;
    for (const auto& [monitor, victim_path] : victim_views) {
        auto pv = probe_views.find(monitor);
        if (pv == probe_views.end() || pv->second.empty()) {
            if (missing_probe_view) *missing_probe_view = true;
            continue;  // nothing to estimate with: treated as not dangerous
        }
        // the probe view ends at the hijacker; splicing the crafted path
        // in its place estimates what the monitor would see
        size_t estimated = pv->second.size() - 1 + crafted_path.size();
        if (estimated <= victim_path.size()) out.push_back(monitor);
    }
    return out;
}

std::vector<uint32_t> naive_path(uint32_t hijacker, uint32_t victim) {
    return {hijacker, victim, victim, victim, victim};
}

StealthyPlan craft_stealthy(const Topology& topo, const Bgp& legit, uint32_t hijacker, uint32_t victim,
                            int victim_prefix, const std::vector<uint32_t>& monitors) {
    StealthyPlan plan;

    const auto& nbrs = topo.neighbors(hijacker);
    const Route* ret = legit.best(hijacker, victim_prefix);
    bool is_monitor = contains(monitors, hijacker);
    bool adjacent = topo.relation(hijacker, victim).has_value();
    if (nbrs.size() < 2 || !ret || ret->path.empty() || is_monitor || adjacent || hijacker == victim) {
        plan.feasible = false;
        return plan;
    }

    uint32_t return_next_hop = ret->path.front();
    // return route minus the victim; the crafted form {hijacker, X, Y, Z,
    // victim} leaves three free middle hops, so keep at most the three
    // hops nearest the hijacker
    std::vector<uint32_t> middles(ret->path.begin(), ret->path.end() - 1);
    constexpr size_t kMiddleSlots = 3;
    if (middles.size() > kMiddleSlots) middles.resize(kMiddleSlots);

    std::vector<uint32_t> base;
    base.push_back(hijacker);
    base.insert(base.end(), middles.begin(), middles.end());
    base.push_back(victim);

    // monitor victim views from the converged legitimate state
    std::map<uint32_t, std::vector<uint32_t>> victim_views;
    for (uint32_t m : monitors)
        if (const Route* r = legit.best(m, victim_prefix)) victim_views[m] = r->path;

    // probe phase: one throwaway prefix per neighbor, announced only
    // there, reveals each monitor's view of routes through that neighbor
    Bgp probe = legit;
    std::map<uint32_t, int> probe_prefix;
    int next_prefix = victim_prefix + 1;
    for (const Topology::Neighbor& n : nbrs) {
        probe_prefix[n.as] = next_prefix;
        probe.inject(hijacker, n.as, next_prefix, {hijacker});
        ++next_prefix;
    }
    probe.run();

    for (const Topology::Neighbor& n : nbrs) {
        if (n.as == return_next_hop) {
            plan.skipped_neighbors.push_back(n.as);  // would break the return route
            continue;
        }
        std::map<uint32_t, std::vector<uint32_t>> probe_views;
        for (uint32_t m : monitors)
            if (const Route* r = probe.best(m, probe_prefix[n.as])) probe_views[m] = r->path;

        bool missing = false;
        std::vector<uint32_t> dangerous = dangerous_monitors(base, victim_views, probe_views, &missing);
        if (missing) plan.estimate_flagged = true;

        // poison ASNs take the middle slots first; leftover slots go to
        // the return-route hops so their loop avoidance shields the
        // hijacker's own way back
        std::vector<uint32_t> poison;
        if (dangerous.size() <= kMiddleSlots) {
            poison = dangerous;  // already sorted ascending (map order)
        } else {
            // too many: poison the ASes most common on the probe views,
            // ties to the lowest ASN
            std::map<uint32_t, int> freq;
            for (const auto& [m, path] : probe_views)
                for (uint32_t as : path)
                    if (as != hijacker && as != victim) ++freq[as];
            std::vector<std::pair<uint32_t, int>> ranked(freq.begin(), freq.end());
            std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                if (a.second != b.second) return a.second > b.second;
                return a.first < b.first;
            });
            for (size_t i = 0; i < ranked.size() && poison.size() < kMiddleSlots; ++i)
                poison.push_back(ranked[i].first);
        }

        StealthyPlan::Crafted crafted;
        crafted.neighbor = n.as;
        crafted.dangerous = dangerous;
        crafted.path.push_back(hijacker);
        crafted.path.insert(crafted.path.end(), poison.begin(), poison.end());
        for (size_t i = 0; i < middles.size() && crafted.path.size() < 1 + kMiddleSlots; ++i)
            if (!contains(poison, middles[i])) crafted.path.push_back(middles[i]);
        crafted.path.push_back(victim);
        plan.announcements.push_back(std::move(crafted));
    }
    return plan;
}

// ---- experiments ----

namespace {

std::vector<uint32_t> scaled_monitors(const Topology& topo, double monitor_scale) {
    std::vector<uint32_t> monitors = topo.monitors();
    if (monitor_scale > 1.0 && !monitors.empty()) {
        size_t want = size_t(double(monitors.size()) * monitor_scale + 0.5);
        for (uint32_t m : place_monitors(topo, topo.nodes().size())) {
            if (monitors.size() >= want) break;
            if (!contains(monitors, m)) monitors.push_back(m);
        }
        std::sort(monitors.begin(), monitors.end());
    }
    return monitors;
}

HijackOutcome measure(const Topology& topo, const Bgp& legit, const Bgp& attacked, uint32_t hijacker,
                      int victim_prefix, const std::vector<uint32_t>& monitors, const std::string& strategy) {
    HijackOutcome out;
    out.strategy = strategy;
    for (uint32_t node : topo.nodes()) {
        if (node == hijacker) continue;
        const Route* pre = legit.best(node, victim_prefix);
        const Route* post = attacked.best(node, victim_prefix);
        bool was = pre && contains(pre->path, hijacker);
        bool now = post && contains(post->path, hijacker);
        if (now && !was) ++out.affected_count;
    }
    for (uint32_t m : monitors) {
        const Route* r = attacked.best(m, victim_prefix);
        if (!r) continue;
        out.monitor_paths[m] = r->path;
        if (contains(r->path, hijacker)) out.visible = true;
    }
    return out;
}

bool pair_valid(const Topology& topo, const Bgp& legit, uint32_t victim, uint32_t hijacker,
                const std::vector<uint32_t>& monitors, int victim_prefix) {
    if (victim == hijacker) return false;
    if (topo.neighbors(hijacker).size() < 2) return false;
    if (contains(monitors, hijacker)) return false;
    if (topo.relation(hijacker, victim)) return false;
    const Route* ret = legit.best(hijacker, victim_prefix);
    if (!ret || ret->path.empty()) return false;
    size_t reached = 0;
    for (uint32_t node : topo.nodes())
        if (legit.best(node, victim_prefix)) ++reached;
    return double(reached) >= 0.9 * double(topo.nodes().size());
}

}  // namespace

ExperimentResult run_pair(const Topology& topo, uint32_t victim, uint32_t hijacker, double monitor_scale,
                          uint64_t seed) {
    ExperimentResult res;
    res.seed = seed;
    res.victim = victim;
    res.hijacker = hijacker;
    res.monitor_scale = monitor_scale;

    std::vector<uint32_t> monitors = scaled_monitors(topo, monitor_scale);
    const int kVictimPrefix = 0;

    Bgp legit(topo);
    legit.originate(victim, kVictimPrefix);
    legit.run();

    {
        Bgp attacked = legit;
        std::vector<uint32_t> path = naive_path(hijacker, victim);
        for (const Topology::Neighbor& n : topo.neighbors(hijacker))
            if (!contains(path, n.as)) attacked.inject(hijacker, n.as, kVictimPrefix, path);
        attacked.run();
        res.naive = measure(topo, legit, attacked, hijacker, kVictimPrefix, monitors, "naive");
    }
    {
        StealthyPlan plan = craft_stealthy(topo, legit, hijacker, victim, kVictimPrefix, monitors);
        Bgp attacked = legit;
        if (plan.feasible)
            for (const StealthyPlan::Crafted& c : plan.announcements)
                attacked.inject(hijacker, c.neighbor, kVictimPrefix, c.path);
        attacked.run();
        res.smart = measure(topo, legit, attacked, hijacker, kVictimPrefix, monitors, "smart");
        // a stealthy attempt that attracts no one failed on its single try
        if (res.smart.affected_count == 0 || !plan.feasible) res.smart.visible = true;
    }
    return res;
}

ExperimentResult run_experiment(const Topology& topo, uint64_t seed, double monitor_scale) {
    const auto& nodes = topo.nodes();
    if (nodes.size() < 4) throw std::runtime_error("topology too small for experiments");
    std::vector<uint32_t> monitors = scaled_monitors(topo, monitor_scale);
    std::mt19937_64 rng(mix64(seed));
    std::uniform_int_distribution<size_t> pick(0, nodes.size() - 1);

    for (int attempt = 0; attempt < 200; ++attempt) {
        uint32_t victim = nodes[pick(rng)];
        uint32_t hijacker = nodes[pick(rng)];
        if (victim == hijacker) continue;
        Bgp legit(topo);
        legit.originate(victim, 0);
        legit.run();
        if (!pair_valid(topo, legit, victim, hijacker, monitors, 0)) continue;
        return run_pair(topo, victim, hijacker, monitor_scale, seed);
    }
    throw std::runtime_error("no valid victim/hijacker pair found after bounded retries");
}

std::vector<uint32_t> place_monitors(const Topology& topo, size_t count) {
    std::vector<uint32_t> nodes = topo.nodes();
    std::stable_sort(nodes.begin(), nodes.end(), [&](uint32_t a, uint32_t b) {
        int da = topo.degree(a), db = topo.degree(b);
        if (da != db) return da > db;
        return a < b;  // already ascending, kept explicit
    });
    if (nodes.size() > count) nodes.resize(count);
    return nodes;
}

Topology synthetic_topology(int node_count, uint64_t seed) {
    if (node_count < 10) throw std::runtime_error("synthetic topology needs at least 10 nodes");
    Topology topo;
    topo.set_seed(seed);
    std::mt19937_64 rng(mix64(seed ^ 0xabcdef));

    int core = std::max(3, node_count / 100);
    int transit = std::max(core + 1, node_count * 15 / 100);
    // ASNs 1..core form a peered clique; providers always have a lower
    // ASN than their customers, so the provider graph is acyclic
    for (int a = 1; a <= core; ++a)
        for (int b = a + 1; b <= core; ++b) topo.add_edge(uint32_t(a), uint32_t(b), 0);

    auto pick_below = [&](int upper) { return 1 + int(rng() % uint64_t(upper)); };
    for (int as = core + 1; as <= node_count; ++as) {
        bool is_transit = as <= core + transit;
        int providers = 1 + int(rng() % 2);
        int upper = is_transit ? as - 1 : core + transit;
        std::vector<int> chosen;
        for (int i = 0; i < providers; ++i) {
            int p = pick_below(upper);
            if (std::find(chosen.begin(), chosen.end(), p) != chosen.end()) continue;
            chosen.push_back(p);
            topo.add_edge(uint32_t(p), uint32_t(as), -1);
        }
    }
    // a few lateral peerings in the transit layer
    int peerings = node_count / 20;
    for (int i = 0; i < peerings; ++i) {
        uint32_t a = uint32_t(core + 1 + int(rng() % uint64_t(transit)));
        uint32_t b = uint32_t(core + 1 + int(rng() % uint64_t(transit)));
        if (a == b || topo.relation(a, b)) continue;
        topo.add_edge(a, b, 0);
    }
    return topo;
}

Topology reference_topology() {
    // nine ASes: origin 1, transits 11/12/21/22, monitors 31/32,
    // multi-homed 41, attacker 66 peering with 41
    Topology topo;
    topo.set_seed(1);
    topo.add_edge(11, 1, -1);
    topo.add_edge(12, 1, -1);
    topo.add_edge(21, 12, -1);
    topo.add_edge(21, 31, -1);
    topo.add_edge(21, 66, -1);
    topo.add_edge(11, 66, -1);
    topo.add_edge(31, 41, -1);
    topo.add_edge(31, 22, -1);
    topo.add_edge(41, 22, -1);
    topo.add_edge(41, 32, -1);
    topo.add_edge(41, 66, 0);
    topo.set_monitors({31, 32});
    return topo;
}

std::string experiments_csv(const std::vector<ExperimentResult>& results) {
    std::ostringstream out;
    out << "#v1 seed,strategy,visible,affected_count,monitor_scale\n";
    for (const ExperimentResult& r : results) {
        out << r.seed << ",naive," << (r.naive.visible ? 1 : 0) << "," << r.naive.affected_count << ","
            << r.monitor_scale << "\n";
        out << r.seed << ",smart," << (r.smart.visible ? 1 : 0) << "," << r.smart.affected_count << ","
            << r.monitor_scale << "\n";
    }
    return out.str();
}

}  // namespace rttwatch
