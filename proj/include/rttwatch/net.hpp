#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rttwatch {

// IPv4 address as a host-order 32-bit value.
struct Ipv4 {
    uint32_t value = 0;

    friend auto operator<=>(const Ipv4&, const Ipv4&) = default;
};

std::optional<Ipv4> parse_ipv4(std::string_view text);
std::string format_ipv4(Ipv4 ip);

// IPv4 CIDR prefix. Host bits below the mask are kept zero.
struct Prefix {
    uint32_t base = 0;
    int len = 0;

    bool contains(Ipv4 ip) const {
        if (len == 0) return true;
        uint32_t mask = ~uint32_t{0} << (32 - len);
        return (ip.value & mask) == base;
    }

    friend auto operator<=>(const Prefix&, const Prefix&) = default;
};

// Parses "a.b.c.d/len". Rejects masks > 32 and nonzero host bits.
std::optional<Prefix> parse_prefix(std::string_view text);
std::string format_prefix(Prefix p);

// A /24 prefix, the granularity of combined signals. Low 8 bits zero.
struct Prefix24 {
    uint32_t base = 0;

    static Prefix24 of(Ipv4 ip) { return Prefix24{ip.value & 0xffffff00u}; }

    Prefix as_prefix() const { return Prefix{base, 24}; }

    friend auto operator<=>(const Prefix24&, const Prefix24&) = default;
};

std::string format_prefix24(Prefix24 p);

// One combined signal: a monitored local /24 paired with a remote AS.
struct SignalKey {
    Prefix24 local_prefix;
    uint32_t remote_as = 0;

    friend auto operator<=>(const SignalKey&, const SignalKey&) = default;
};

struct SignalKeyHash {
    size_t operator()(const SignalKey& k) const {
        uint64_t v = (uint64_t(k.local_prefix.base) << 32) | k.remote_as;
        v ^= v >> 33;
        v *= 0xff51afd7ed558ccdULL;
        v ^= v >> 33;
        return size_t(v);
    }
};

}  // namespace rttwatch
