// Copyright 2026 The episcen Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "episcen/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "episcen/errors.hpp"

namespace episcen {

std::vector<double> mid_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

namespace {

void require_nonempty(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.empty() || b.empty()) throw InputError(std::string(what) + ": both samples must be non-empty");
}

std::vector<double> pooled(std::span<const double> a, std::span<const double> b) {
    std::vector<double> all(a.begin(), a.end());
    all.insert(all.end(), b.begin(), b.end());
    return all;
}

// Pairs (x, y) with x > y, ties counting one half. Exact in binary for any
// realistic sample size.
double pair_wins(std::span<const double> a, std::span<const double> b) {
    double wins = 0.0;
    for (double x : a)
        for (double y : b) wins += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
    return wins;
}

}  // namespace

double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b, "mann_whitney_exact_p");
    const std::vector<double> all = pooled(a, b);
    const std::vector<double> ranks = mid_ranks(all);
    // Doubled mid-ranks are integers, so the rank sum of a random size-n1 subset
    // has an integer-indexed distribution: ways[k][s] = #subsets of size k with doubled sum s.
    std::vector<int> doubled(ranks.size());
    for (std::size_t i = 0; i < ranks.size(); ++i) doubled[i] = static_cast<int>(std::lround(2.0 * ranks[i]));
    const std::size_t n1 = a.size();
    const int max_sum = std::accumulate(doubled.begin(), doubled.end(), 0);
    std::vector<std::vector<double>> ways(n1 + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (int r : doubled)
        for (std::size_t k = n1; k >= 1; --k)
            for (int s = max_sum; s >= r; --s) ways[k][static_cast<std::size_t>(s)] += ways[k - 1][static_cast<std::size_t>(s - r)];

    // Two-sided: subsets whose rank sum lies at least as far from the null
    // mean as the observed one. Works on doubled sums, so it is exact.
    int observed = 0;
    for (std::size_t i = 0; i < n1; ++i) observed += doubled[i];
    const auto mean2 = static_cast<int>(n1 * (ranks.size() + 1));
    const int dev = std::abs(observed - mean2);
    double total = 0.0, extreme = 0.0;
    for (int s = 0; s <= max_sum; ++s) {
        const double w = ways[n1][static_cast<std::size_t>(s)];
        total += w;
        if (std::abs(s - mean2) >= dev) extreme += w;
    }
    return std::min(1.0, extreme / total);
}

MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b, "mann_whitney_u");
    MannWhitney r;
    const auto n1 = static_cast<double>(a.size());
    const auto n2 = static_cast<double>(b.size());
    r.u = pair_wins(a, b);
    if (a.size() < kMannWhitneyExactLimit && b.size() < kMannWhitneyExactLimit) {
        r.exact = true;
        r.p = mann_whitney_exact_p(a, b);
        return r;
    }
    const std::vector<double> all = pooled(a, b);
    std::vector<double> sorted = all;
    std::sort(sorted.begin(), sorted.end());
    double tie_term = 0.0;
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const auto t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double n = n1 + n2;
    const double variance = n1 * n2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if (variance <= 0.0) {
        r.p = 1.0;
        return r;
    }
    const double z = std::max(0.0, std::abs(r.u - n1 * n2 / 2.0) - 0.5) / std::sqrt(variance);
    r.p = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
    return r;
}

double vargha_delaney_a12(std::span<const double> a, std::span<const double> b) {
    require_nonempty(a, b, "vargha_delaney_a12");
    return pair_wins(a, b) / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

std::string_view magnitude_name(CorrelationMagnitude m) noexcept {
    switch (m) {
        case CorrelationMagnitude::Negligible: return "negligible";
        case CorrelationMagnitude::Low: return "low";
        case CorrelationMagnitude::Moderate: return "moderate";
        case CorrelationMagnitude::High: return "high";
        case CorrelationMagnitude::VeryHigh: return "very high";
    }
    return "?";
}

CorrelationMagnitude correlation_magnitude(double rho) noexcept {
    const double r = std::abs(rho);
    if (r < 0.3) return CorrelationMagnitude::Negligible;
    if (r < 0.5) return CorrelationMagnitude::Low;
    if (r < 0.7) return CorrelationMagnitude::Moderate;
    if (r < 0.9) return CorrelationMagnitude::High;
    return CorrelationMagnitude::VeryHigh;
}

Spearman spearman_rho(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw InputError("spearman_rho: samples must be paired");
    if (x.size() < 3) throw InputError("spearman_rho: need at least 3 pairs");
    const std::vector<double> rx = mid_ranks(x);
    const std::vector<double> ry = mid_ranks(y);
    const auto n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw InputError("spearman_rho: undefined for a constant sample");
    Spearman s;
    s.rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    s.magnitude = correlation_magnitude(s.rho);
    if (std::abs(s.rho) == 1.0) {
        s.p = 0.0;
        return s;
    }
    const double df = n - 2.0;
    const double t = s.rho * std::sqrt(df / (1.0 - s.rho * s.rho));
    const boost::math::students_t dist(df);
    s.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    return s;
}

MeanCi mean_ci95(std::span<const double> values) {
    if (values.empty()) throw InputError("mean_ci95: empty sample");
    MeanCi r;
    const auto n = static_cast<double>(values.size());
    r.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() < 2) return r;
    double ss = 0.0;
    for (double v : values) ss += (v - r.mean) * (v - r.mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    r.half_width = boost::math::quantile(boost::math::complement(dist, 0.025)) * sd / std::sqrt(n);
    return r;
}

double median(std::span<const double> values) {
    if (values.empty()) throw InputError("median: empty sample");
    std::vector<double> v(values.begin(), values.end());
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace episcen
