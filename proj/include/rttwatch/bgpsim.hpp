#pragma once

#include <cstdint>
#include <deque>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace rttwatch {

// Role of a neighbor relative to a node.
enum class Rel { Customer, Peer, Provider };

// AS-level topology with provider/customer and peer edges, a monitor
// set, and per-directed-edge tiebreak values derived from a run seed.
class Topology {
  public:
    struct Neighbor {
        uint32_t as = 0;
        Rel rel = Rel::Peer;  // the neighbor's role from this node's view
    };

    // Lines `asn1|asn2|rel`, rel -1 (asn1 provider of asn2) or 0 (peers),
    // `#` comments. Conflicting duplicate edges, self-edges and unknown
    // rel codes throw. A second stream in the same format may add extra
    // peer links later via add_edge.
    static Topology load_caida(std::istream& in);

    void add_edge(uint32_t a, uint32_t b, int rel_code);

    // One ASN per line, `#` comments; every ASN must be a node.
    void load_monitors(std::istream& in);
    void set_monitors(std::vector<uint32_t> monitors);
    void set_seed(uint64_t seed) { seed_ = seed; }

    const std::vector<uint32_t>& nodes() const;  // sorted, built lazily
    bool has_node(uint32_t as) const { return adj_.count(as) != 0; }
    const std::vector<Neighbor>& neighbors(uint32_t as) const;
    std::optional<Rel> relation(uint32_t node, uint32_t other) const;
    int degree(uint32_t as) const;
    const std::vector<uint32_t>& monitors() const { return monitors_; }
    uint64_t seed() const { return seed_; }

    // Deterministic per (node, neighbor) tie-breaking attribute.
    uint64_t tiebreak(uint32_t node, uint32_t neighbor) const;

  private:
    std::unordered_map<uint32_t, std::vector<Neighbor>> adj_;
    std::vector<uint32_t> monitors_;
    uint64_t seed_ = 1;
    mutable std::vector<uint32_t> nodes_cache_;
    mutable bool nodes_dirty_ = true;
};

// pref: self-originated 3, customer-learned 2, peer 1, provider 0.
struct Route {
    std::vector<uint32_t> path;  // as received; empty for self-originated
    uint32_t learned_from = 0;
    int pref = 0;
    uint64_t tiebreak = 0;
};

// Lexicographic preference: higher pref class, then shorter path, then
// lower tiebreak. nullptr for an empty candidate set.
const Route* best_route(const std::vector<const Route*>& candidates);

// Customer-learned or self-originated routes go to every neighbor;
// peer/provider-learned routes only to customers.
bool export_allowed(int route_pref, Rel to_neighbor);

// Work-queue BGP propagation. Receive side drops paths containing the
// receiver and otherwise replaces the per-neighbor RIB entry, keeping
// non-best entries as backups; best-route changes re-export. FIFO order
// plus seeded tiebreaks make runs deterministic. Copyable, so a
// converged state can seed several what-if runs.
class Bgp {
  public:
    explicit Bgp(const Topology& topo) : topo_(&topo) {}

    void originate(uint32_t node, int prefix);
    // Delivers an arbitrary announcement (path as sent) on an edge.
    void inject(uint32_t from, uint32_t to, int prefix, std::vector<uint32_t> path_as_sent);

    // Drains the queue to the fixpoint. Throws if the iteration cap is
    // hit (cannot happen under customer/peer/provider-compliant export).
    void run();

    const Route* best(uint32_t node, int prefix) const;
    const Route* rib_entry(uint32_t node, int prefix, uint32_t from) const;

    uint64_t updates_processed() const { return processed_; }
    uint64_t loop_drops() const { return loop_drops_; }
    uint64_t best_changes() const { return best_changes_; }

  private:
    struct Msg {
        uint32_t from, to;
        int prefix;
        std::vector<uint32_t> path;
    };
    struct NodeState {
        std::map<int, std::map<uint32_t, Route>> rib_in;  // prefix -> neighbor -> route
        std::map<int, Route> best;
    };

    void deliver(const Msg& m);
    void export_best(uint32_t node, int prefix);

    const Topology* topo_;
    std::unordered_map<uint32_t, NodeState> state_;
    std::deque<Msg> queue_;
    int max_prefix_ = -1;
    uint64_t processed_ = 0;
    uint64_t loop_drops_ = 0;
    uint64_t best_changes_ = 0;
};

// True when `path`, walked from its owner toward the origin, climbs
// through providers first, crosses at most one peer link, then descends
// through customers.
bool valley_free(const Topology& topo, uint32_t owner, const std::vector<uint32_t>& path);

// Monitors whose estimated view of the crafted announcement — probe-view
// length minus the hijacker hop, plus the crafted path — is no longer
// than their current path to the victim. Monitors without a victim view
// never qualify; monitors without a probe view are skipped and flagged.
std::vector<uint32_t> dangerous_monitors(const std::vector<uint32_t>& crafted_path,
                                         const std::map<uint32_t, std::vector<uint32_t>>& victim_views,
                                         const std::map<uint32_t, std::vector<uint32_t>>& probe_views,
                                         bool* missing_probe_view = nullptr);

// Per-neighbor crafted announcements for a stealthy hijack: the path is
// {hijacker, X, Y, Z, victim} with at most three middle hops. Dangerous
// monitors (or, past three, the most common ASes on the monitors' probe
// views, ties to the lowest ASN) are poisoned in first; leftover slots
// carry the return route's nearest hops so loop avoidance shields the
// hijacker's way back. The neighbor carrying the return route itself is
// skipped.
struct StealthyPlan {
    struct Crafted {
        uint32_t neighbor = 0;
        std::vector<uint32_t> path;
        std::vector<uint32_t> dangerous;  // estimate for this neighbor
    };
    std::vector<Crafted> announcements;
    std::vector<uint32_t> skipped_neighbors;
    bool feasible = true;          // preconditions held
    bool estimate_flagged = false; // a monitor lacked some probe view
};

StealthyPlan craft_stealthy(const Topology& topo, const Bgp& legit, uint32_t hijacker, uint32_t victim,
                            int victim_prefix, const std::vector<uint32_t>& monitors);

// The prepending baseline: {hijacker, victim, victim, victim, victim}.
std::vector<uint32_t> naive_path(uint32_t hijacker, uint32_t victim);

struct HijackOutcome {
    std::string strategy;  // "naive" | "smart"
    bool visible = false;
    int affected_count = 0;
    std::map<uint32_t, std::vector<uint32_t>> monitor_paths;  // post-attack best paths
};

struct ExperimentResult {
    uint64_t seed = 0;
    uint32_t victim = 0;
    uint32_t hijacker = 0;
    double monitor_scale = 1;
    bool pair_valid = true;
    HijackOutcome naive;
    HijackOutcome smart;
};

// Fixed victim/hijacker pair: converge the legitimate state, then apply
// each strategy to a fresh copy. visible = any monitor's best path
// contains the hijacker; a smart attack that attracts nobody is a failed
// attempt and also counts as visible. affected_count ignores ASes that
// already routed via the hijacker beforehand.
ExperimentResult run_pair(const Topology& topo, uint32_t victim, uint32_t hijacker, double monitor_scale,
                          uint64_t seed);

// Samples a valid (victim, hijacker) pair from the seed with bounded
// retries, then runs both strategies. Validity: the victim's prefix
// reaches >= 90% of ASes and the hijacker has two neighbors, a return
// route, and is neither a monitor nor adjacent to the victim.
ExperimentResult run_experiment(const Topology& topo, uint64_t seed, double monitor_scale = 1.0);

// Highest-degree monitor placement (ties to the lowest ASN); growing
// `count` always yields a superset.
std::vector<uint32_t> place_monitors(const Topology& topo, size_t count);

// Deterministic three-tier topology: a small peered core, a transit
// layer, and stubs, every provider having a lower ASN than its customer.
Topology synthetic_topology(int node_count, uint64_t seed);

// Hand-checked nine-AS fixture (monitors 31 and 32) whose legitimate
// and hijacked routes are known exactly; used by tests and the
// simulator demo.
Topology reference_topology();

// CSV: `seed,strategy,visible,affected_count,monitor_scale` with a #v1 header.
std::string experiments_csv(const std::vector<ExperimentResult>& results);

}  // namespace rttwatch
