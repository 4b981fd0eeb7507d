#include "rttwatch/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rttwatch {

namespace {

struct PooledRanks {
    std::vector<double> ranks_a;
    bool has_ties = false;
    double tie_term = 0;  // sum over tie blocks of t^3 - t
};

PooledRanks pooled_midranks(std::span<const uint32_t> a, std::span<const uint32_t> b) {
    struct Item {
        uint32_t value;
        bool from_a;
    };
    std::vector<Item> pool;
    pool.reserve(a.size() + b.size());
    for (uint32_t v : a) pool.push_back({v, true});
    for (uint32_t v : b) pool.push_back({v, false});
    std::sort(pool.begin(), pool.end(), [](const Item& x, const Item& y) { return x.value < y.value; });

    PooledRanks out;
    size_t i = 0;
    while (i < pool.size()) {
        size_t j = i;
        while (j < pool.size() && pool[j].value == pool[i].value) ++j;
        double t = double(j - i);
        double midrank = (double(i + 1) + double(j)) / 2.0;
        if (t > 1) {
            out.has_ties = true;
            out.tie_term += t * t * t - t;
        }
        for (size_t k = i; k < j; ++k)
            if (pool[k].from_a) out.ranks_a.push_back(midrank);
        i = j;
    }
    return out;
}

}  // namespace

RankSumResult rank_sum(std::span<const uint32_t> a, std::span<const uint32_t> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("rank_sum: empty side");
    PooledRanks pooled = pooled_midranks(a, b);
    double w = 0;
    for (double r : pooled.ranks_a) w += r;
    double n = double(a.size());
    return RankSumResult{w, w - n * (n + 1) / 2.0};
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double exact_u_cdf(int n, int m, double u) {
    if (u < 0) return 0;
    int nm = n * m;
    int cap = std::min<int>(int(std::floor(u)), nm);
    // g[j][i][v] = number of interleavings of j elements of a among i
    // elements of b with U statistic v.
    std::vector<std::vector<std::vector<double>>> g(
        n + 1, std::vector<std::vector<double>>(m + 1, std::vector<double>(nm + 1, 0.0)));
    for (int i = 0; i <= m; ++i) g[0][i][0] = 1;
    for (int j = 0; j <= n; ++j) g[j][0][0] = 1;
    for (int j = 1; j <= n; ++j)
        for (int i = 1; i <= m; ++i)
            for (int v = 0; v <= j * i; ++v) {
                double ways = g[j][i - 1][v];
                if (v >= i) ways += g[j - 1][i][v - i];
                g[j][i][v] = ways;
            }
    double total = 0, below = 0;
    for (int v = 0; v <= nm; ++v) {
        total += g[n][m][v];
        if (v <= cap) below += g[n][m][v];
    }
    return below / total;
}

double mwu_two_sided_p(std::span<const uint32_t> a, std::span<const uint32_t> b) {
    if (a.size() < 1 || b.size() < 1) throw std::invalid_argument("mwu: empty side");
    size_t n = a.size(), m = b.size();
    PooledRanks pooled = pooled_midranks(a, b);
    double w_a = 0;
    for (double r : pooled.ranks_a) w_a += r;
    double u_a = w_a - double(n) * double(n + 1) / 2.0;
    double u_b = double(n) * double(m) - u_a;
    double u = std::min(u_a, u_b);

    if (!pooled.has_ties && n * m <= 400) {
        double p = 2.0 * exact_u_cdf(int(n), int(m), u + 1e-9);
        return std::min(1.0, p);
    }

    double N = double(n + m);
    double mean = double(n) * double(m) / 2.0;
    double var = double(n) * double(m) / 12.0 * ((N + 1.0) - pooled.tie_term / (N * (N - 1.0)));
    if (var <= 0) return 1.0;  // all pooled values identical
    double z = (u + 0.5 - mean) / std::sqrt(var);
    return std::min(1.0, 2.0 * normal_cdf(z));
}

}  // namespace rttwatch
