#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rttwatch/stats.hpp"

using namespace rttwatch;

namespace {

// Brute-force two-sided p: enumerate every C(n+m, n) assignment of the
// pooled ranks to side a and count splits at or below the observed
// smaller-side U.
double enumerated_p(const std::vector<uint32_t>& a, const std::vector<uint32_t>& b) {
    size_t n = a.size(), m = b.size(), total = n + m;
    std::vector<uint32_t> pool(a);
    pool.insert(pool.end(), b.begin(), b.end());
    std::vector<size_t> order(total);
    for (size_t i = 0; i < total; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t x, size_t y) { return pool[x] < pool[y]; });
    std::vector<double> rank(total);
    for (size_t r = 0; r < total; ++r) rank[order[r]] = double(r + 1);

    double w_obs = 0;
    for (size_t i = 0; i < n; ++i) w_obs += rank[i];
    double u_obs_a = w_obs - double(n) * double(n + 1) / 2.0;
    double u_obs = std::min(u_obs_a, double(n * m) - u_obs_a);

    // iterate all n-subsets of {0..total-1} as the a side
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    uint64_t count = 0, favorable = 0;
    for (;;) {
        double w = 0;
        for (size_t i : idx) w += double(i + 1);  // ranks are 1..total (tie-free)
        double ua = w - double(n) * double(n + 1) / 2.0;
        double u = std::min(ua, double(n * m) - ua);
        ++count;
        if (u <= u_obs + 1e-9) ++favorable;
        // next combination
        size_t k = n;
        while (k > 0 && idx[k - 1] == total - n + k - 1) --k;
        if (k == 0) break;
        ++idx[k - 1];
        for (size_t j = k; j < n; ++j) idx[j] = idx[j - 1] + 1;
    }
    // counting splits with min(U_a, U_b) <= u_obs covers both tails at
    // once, so no doubling is needed
    return double(favorable) / double(count);
}

std::vector<uint32_t> distinct_values(std::mt19937_64& rng, size_t count) {
    std::vector<uint32_t> out;
    std::uniform_int_distribution<uint32_t> dist(1, 1u << 30);
    while (out.size() < count) {
        uint32_t v = dist(rng);
        if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
    }
    return out;
}

}  // namespace

TEST_CASE("rank sum on hand-checked values") {
    // pooled: 1,2,3,4 -> a holds ranks 1 and 3
    std::vector<uint32_t> a{10, 30}, b{20, 40};
    auto r = rank_sum(a, b);
    CHECK(r.rank_sum_a == doctest::Approx(4.0));
    CHECK(r.u_a == doctest::Approx(1.0));
}

TEST_CASE("midranks on ties") {
    // pooled sorted: 5,7,7,9 -> ranks 1, 2.5, 2.5, 4
    std::vector<uint32_t> a{7, 9}, b{5, 7};
    auto r = rank_sum(a, b);
    CHECK(r.rank_sum_a == doctest::Approx(6.5));
}

TEST_CASE("u_a and u_b always sum to n*m") {
    std::mt19937_64 rng(5);
    for (int round = 0; round < 100; ++round) {
        size_t n = 1 + rng() % 12, m = 1 + rng() % 12;
        std::vector<uint32_t> a, b;
        for (size_t i = 0; i < n; ++i) a.push_back(uint32_t(rng() % 50));
        for (size_t i = 0; i < m; ++i) b.push_back(uint32_t(rng() % 50));
        double ua = rank_sum(a, b).u_a;
        double ub = rank_sum(b, a).u_a;
        CHECK(ua + ub == doctest::Approx(double(n * m)));
    }
}

TEST_CASE("exact null distribution is a valid cdf") {
    CHECK(exact_u_cdf(4, 5, -1) == 0.0);
    CHECK(exact_u_cdf(4, 5, 20) == doctest::Approx(1.0));
    double prev = -1;
    for (int u = 0; u <= 20; ++u) {
        double c = exact_u_cdf(4, 5, u);
        CHECK(c >= prev);
        prev = c;
    }
    // symmetry of the null distribution around nm/2
    for (int u = 0; u < 10; ++u)
        CHECK(exact_u_cdf(4, 5, u) ==
              doctest::Approx(1.0 - exact_u_cdf(4, 5, 19 - u)).epsilon(1e-12));
}

TEST_CASE("exact p equals full enumeration for small tie-free samples") {
    std::mt19937_64 rng(11);
    for (int round = 0; round < 30; ++round) {
        size_t n = 2 + rng() % 5, m = 2 + rng() % 5;
        auto pool = distinct_values(rng, n + m);
        std::vector<uint32_t> a(pool.begin(), pool.begin() + long(n));
        std::vector<uint32_t> b(pool.begin() + long(n), pool.end());
        double got = mwu_two_sided_p(a, b);
        double want = enumerated_p(a, b);
        CHECK(got == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("all-identical pools give p = 1") {
    std::vector<uint32_t> a(10, 42), b(15, 42);
    CHECK(mwu_two_sided_p(a, b) == 1.0);
}

TEST_CASE("two-sided symmetry") {
    std::mt19937_64 rng(21);
    for (int round = 0; round < 50; ++round) {
        size_t n = 3 + rng() % 20, m = 3 + rng() % 20;
        std::vector<uint32_t> a, b;
        for (size_t i = 0; i < n; ++i) a.push_back(20000 + uint32_t(rng() % 3000));
        for (size_t i = 0; i < m; ++i) b.push_back(21000 + uint32_t(rng() % 3000));
        CHECK(mwu_two_sided_p(a, b) == doctest::Approx(mwu_two_sided_p(b, a)).epsilon(1e-12));
    }
}

TEST_CASE("p value decreases monotonically with shift size") {
    std::mt19937_64 rng(31);
    std::vector<uint32_t> base;
    for (int i = 0; i < 20; ++i) base.push_back(20000 + uint32_t(rng() % 500));
    double prev = 1.1;
    for (uint32_t shift : {0u, 300u, 800u, 2000u, 6000u}) {
        std::vector<uint32_t> shifted;
        for (uint32_t v : base) shifted.push_back(v + shift);
        double p = mwu_two_sided_p(shifted, base);
        CHECK(p <= prev + 1e-12);
        prev = p;
    }
    CHECK(prev < 0.001);  // a 6ms shift is unmistakable at m=20
}

TEST_CASE("approximate path stays close to the exact one at the crossover") {
    // n*m just above and below the exact cutoff should not disagree wildly
    std::mt19937_64 rng(41);
    auto pool = distinct_values(rng, 20 + 21);
    std::vector<uint32_t> a(pool.begin(), pool.begin() + 20);
    SUBCASE("cutoff sides agree within a few percent") {
        std::vector<uint32_t> b20(pool.begin() + 20, pool.begin() + 40);  // 400: exact
        std::vector<uint32_t> b21(pool.begin() + 20, pool.begin() + 41);  // 420: approx
        double exact = mwu_two_sided_p(a, b20);
        double approx = mwu_two_sided_p(a, b21);
        CHECK(std::abs(exact - approx) < 0.08);
    }
}

TEST_CASE("empty sides are rejected") {
    std::vector<uint32_t> a{1}, empty;
    CHECK_THROWS_AS(rank_sum(a, empty), std::invalid_argument);
    CHECK_THROWS_AS(mwu_two_sided_p(empty, a), std::invalid_argument);
}
