#include "rttwatch/net.hpp"

#include <charconv>

namespace rttwatch {

namespace {

bool parse_u32(std::string_view s, uint32_t& out, uint32_t max) {
    if (s.empty()) return false;
    uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || v > max) return false;
    out = v;
    return true;
}

}  // namespace

std::optional<Ipv4> parse_ipv4(std::string_view text) {
    uint32_t value = 0;
    for (int i = 0; i < 4; ++i) {
        size_t dot = text.find('.');
        if ((i < 3) != (dot != std::string_view::npos)) return std::nullopt;
        std::string_view part = (i < 3) ? text.substr(0, dot) : text;
        uint32_t octet = 0;
        if (!parse_u32(part, octet, 255)) return std::nullopt;
        value = (value << 8) | octet;
        if (i < 3) text.remove_prefix(dot + 1);
    }
    return Ipv4{value};
}

std::string format_ipv4(Ipv4 ip) {
    return std::to_string(ip.value >> 24) + "." + std::to_string((ip.value >> 16) & 255) + "." +
           std::to_string((ip.value >> 8) & 255) + "." + std::to_string(ip.value & 255);
}

std::optional<Prefix> parse_prefix(std::string_view text) {
    size_t slash = text.find('/');
    if (slash == std::string_view::npos) return std::nullopt;
    auto ip = parse_ipv4(text.substr(0, slash));
    if (!ip) return std::nullopt;
    uint32_t len = 0;
    if (!parse_u32(text.substr(slash + 1), len, 32)) return std::nullopt;
    uint32_t mask = len == 0 ? 0 : ~uint32_t{0} << (32 - len);
    if ((ip->value & ~mask) != 0) return std::nullopt;  // host bits set
    return Prefix{ip->value, int(len)};
}

std::string format_prefix(Prefix p) {
    return format_ipv4(Ipv4{p.base}) + "/" + std::to_string(p.len);
}

std::string format_prefix24(Prefix24 p) { return format_prefix(p.as_prefix()); }

}  // namespace rttwatch
