#include "rttwatch/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace rttwatch {

namespace {

[[noreturn]] void line_error(size_t line_no, const std::string& what) {
    throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

std::string_view strip(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

bool is_blank_or_comment(std::string_view s) {
    s = strip(s);
    return s.empty() || s.front() == '#';
}

}  // namespace

PrefixOriginMap PrefixOriginMap::load(std::istream& in) {
    PrefixOriginMap map;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank_or_comment(line)) continue;
        size_t tab = line.find('\t');
        if (tab == std::string::npos) line_error(line_no, "expected <prefix><TAB><AS path>");
        auto prefix = parse_prefix(strip(std::string_view(line).substr(0, tab)));
        if (!prefix) line_error(line_no, "invalid CIDR prefix");
        std::vector<uint32_t> path;
        std::istringstream rest{line.substr(tab + 1)};
        std::string tok;
        while (rest >> tok) {
            uint32_t asn = 0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), asn);
            if (ec != std::errc{} || p != tok.data() + tok.size())
                line_error(line_no, "invalid AS number '" + tok + "'");
            path.push_back(asn);
        }
        if (path.empty()) line_error(line_no, "empty AS path");
        for (const auto& e : map.entries_)
            if (e.prefix == *prefix) line_error(line_no, "duplicate prefix " + format_prefix(*prefix));
        map.add(*prefix, std::move(path));
    }
    return map;
}

void PrefixOriginMap::add(Prefix prefix, std::vector<uint32_t> as_path) {
    if (as_path.empty()) throw std::runtime_error("empty AS path for " + format_prefix(prefix));
    index_[prefix.len][prefix.base] = entries_.size();
    entries_.push_back(Entry{prefix, std::move(as_path)});
}

const PrefixOriginMap::Entry* PrefixOriginMap::lookup(Ipv4 ip) const {
    for (int len = 32; len >= 0; --len) {
        if (index_[len].empty()) continue;
        uint32_t mask = len == 0 ? 0 : ~uint32_t{0} << (32 - len);
        auto it = index_[len].find(ip.value & mask);
        if (it != index_[len].end()) return &entries_[it->second];
    }
    return nullptr;
}

std::optional<uint32_t> PrefixOriginMap::resolve_origin(Ipv4 ip) const {
    const Entry* e = lookup(ip);
    if (!e) return std::nullopt;
    return e->as_path.back();
}

MonitoredPrefixSet MonitoredPrefixSet::load(std::istream& in) {
    MonitoredPrefixSet set;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank_or_comment(line)) continue;
        auto p = parse_prefix(strip(line));
        if (!p) line_error(line_no, "invalid CIDR prefix");
        if (p->len > 24) line_error(line_no, "monitored prefix longer than /24: " + format_prefix(*p));
        set.add(*p);
    }
    return set;
}

void MonitoredPrefixSet::add(Prefix p) {
    if (p.len > 24) throw std::runtime_error("monitored prefix longer than /24: " + format_prefix(p));
    inputs_.push_back(p);
    uint32_t count = uint32_t{1} << (24 - p.len);
    for (uint32_t i = 0; i < count; ++i) {
        uint32_t base = p.base + (i << 8);
        if (members_.insert(base).second) expanded_.push_back(Prefix24{base});
    }
    std::sort(expanded_.begin(), expanded_.end());
}

NormalizeResult normalize(const RawSample& raw, const MonitoredPrefixSet& set,
                          const PrefixOriginMap& map) {
    if (raw.rtt_us == 0) return RejectReason::BadRtt;
    bool local_in = set.covers(raw.local_ip);
    bool remote_in = set.covers(raw.remote_ip);
    if (local_in && remote_in) return RejectReason::InternalTraffic;
    if (!local_in && !remote_in) return RejectReason::NotMonitored;
    Ipv4 local = local_in ? raw.local_ip : raw.remote_ip;
    Ipv4 remote = local_in ? raw.remote_ip : raw.local_ip;
    auto origin = map.resolve_origin(remote);
    if (!origin) return RejectReason::UnknownOrigin;
    return RttSample{raw.timestamp_us, SignalKey{Prefix24::of(local), *origin}, raw.rtt_us};
}

const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::NotMonitored: return "not_monitored";
        case RejectReason::UnknownOrigin: return "unknown_origin";
        case RejectReason::InternalTraffic: return "internal_traffic";
        case RejectReason::NonMonotoneTimestamp: return "non_monotone_timestamp";
        case RejectReason::BadRtt: return "bad_rtt";
    }
    return "unknown";
}

std::optional<RawSample> parse_trace_line(std::string_view line) {
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    if (!j.contains("ts_us") || !j.contains("local") || !j.contains("remote") || !j.contains("rtt_us"))
        return std::nullopt;
    auto local = parse_ipv4(j["local"].get<std::string>());
    auto remote = parse_ipv4(j["remote"].get<std::string>());
    if (!local || !remote) return std::nullopt;
    RawSample s;
    s.timestamp_us = j["ts_us"].get<int64_t>();
    s.local_ip = *local;
    s.remote_ip = *remote;
    s.rtt_us = j["rtt_us"].get<uint32_t>();
    return s;
}

std::string format_trace_line(const RawSample& s) {
    return "{\"ts_us\":" + std::to_string(s.timestamp_us) + ",\"local\":\"" + format_ipv4(s.local_ip) +
           "\",\"remote\":\"" + format_ipv4(s.remote_ip) + "\",\"rtt_us\":" + std::to_string(s.rtt_us) + "}";
}

}  // namespace rttwatch
