#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

#include "rttwatch/net.hpp"

namespace rttwatch {

// One RTT measurement as it arrives from the extraction layer.
struct RawSample {
    int64_t timestamp_us = 0;
    Ipv4 local_ip;
    Ipv4 remote_ip;
    uint32_t rtt_us = 0;
};

// A measurement mapped onto its combined signal.
struct RttSample {
    int64_t timestamp_us = 0;
    SignalKey key;
    uint32_t rtt_us = 0;
};

// Longest-prefix-match index from IP prefixes to the AS paths announcing
// them. The origin AS of a prefix is the last element of its path.
class PrefixOriginMap {
  public:
    struct Entry {
        Prefix prefix;
        std::vector<uint32_t> as_path;
    };

    // Input lines: `<prefix><TAB><space-separated AS path>`. `#` starts a
    // comment. Throws std::runtime_error naming the offending line.
    static PrefixOriginMap load(std::istream& in);

    void add(Prefix prefix, std::vector<uint32_t> as_path);

    // Origin AS of the longest matching prefix, or nullopt.
    std::optional<uint32_t> resolve_origin(Ipv4 ip) const;

    // Full matching entry (longest prefix), or nullptr.
    const Entry* lookup(Ipv4 ip) const;

    const std::vector<Entry>& entries() const { return entries_; }

  private:
    std::vector<Entry> entries_;
    // per prefix length, masked base -> entry index
    std::unordered_map<uint32_t, size_t> index_[33];
};

// The /24 prefixes the local AS owns and wants watched.
class MonitoredPrefixSet {
  public:
    // One CIDR per line, `#` comments. Prefixes longer than /24 are a
    // configuration error.
    static MonitoredPrefixSet load(std::istream& in);

    void add(Prefix p);

    // Every /n input prefix expanded into its 2^(24-n) /24 subnets,
    // deduplicated and sorted ascending.
    const std::vector<Prefix24>& expanded() const { return expanded_; }

    bool contains(Prefix24 p) const { return members_.count(p.base) != 0; }
    bool covers(Ipv4 ip) const { return contains(Prefix24::of(ip)); }

  private:
    std::vector<Prefix> inputs_;
    std::vector<Prefix24> expanded_;
    std::unordered_set<uint32_t> members_;
};

enum class RejectReason { NotMonitored, UnknownOrigin, InternalTraffic, NonMonotoneTimestamp, BadRtt };

const char* reject_reason_name(RejectReason r);

using NormalizeResult = std::variant<RttSample, RejectReason>;

// Decides which endpoint is local, truncates it to /24 and resolves the
// other endpoint's origin AS. Total: every sample yields a keyed sample
// or a reject reason.
NormalizeResult normalize(const RawSample& raw, const MonitoredPrefixSet& set,
                          const PrefixOriginMap& map);

// NDJSON trace line: {"ts_us":..,"local":"..","remote":"..","rtt_us":..}
std::optional<RawSample> parse_trace_line(std::string_view line);
std::string format_trace_line(const RawSample& s);

}  // namespace rttwatch
