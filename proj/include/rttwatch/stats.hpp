#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rttwatch {

struct RankSumResult {
    double rank_sum_a = 0;  // W_a, pooled midranks
    double u_a = 0;         // U_a = W_a - |a|(|a|+1)/2
};

// Pools both samples, ranks them ascending with midranks for ties, and
// sums the ranks of `a`.
RankSumResult rank_sum(std::span<const uint32_t> a, std::span<const uint32_t> b);

// Two-sided Wilcoxon-Mann-Whitney p-value. Exact via the rank-split
// distribution when |a|*|b| <= 400 and the data is tie-free; otherwise a
// normal approximation with tie-corrected variance and 0.5 continuity
// correction. All pooled values identical -> 1 by convention.
double mwu_two_sided_p(std::span<const uint32_t> a, std::span<const uint32_t> b);

// Standard normal CDF.
double normal_cdf(double z);

// P(U <= u) for the exact null distribution of the Mann-Whitney U
// statistic with sample sizes n and m (tie-free). Exposed for tests.
double exact_u_cdf(int n, int m, double u);

}  // namespace rttwatch
