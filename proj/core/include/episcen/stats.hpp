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

// Non-parametric statistics used by the experiment reports.

#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace episcen {

inline constexpr double kSignificance = 0.05;

/// Mid-ranks (1-based) of the values; ties share the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> values);

struct MannWhitney {
    /// U for the first sample: #{a > b} + 0.5 * #{a == b}.
    double u = 0.0;
    /// Two-sided p-value.
    double p = 1.0;
    bool exact = false;
};

/// Sample sizes below this (both samples) use the exact permutation distribution.
inline constexpr std::size_t kMannWhitneyExactLimit = 20;

/// Two-sided Mann-Whitney U test. Exact (tie-aware) permutation distribution
/// when both samples are smaller than 20, otherwise the normal approximation
/// with tie and continuity corrections. Throws InputError on an empty sample.
MannWhitney mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Exact two-sided p-value from the permutation distribution of the rank sum:
/// the share of splits whose sum is at least as far from its mean as observed.
double mann_whitney_exact_p(std::span<const double> a, std::span<const double> b);

/// Vargha-Delaney A12: probability that a value from `a` exceeds one from `b`, ties counted half.
double vargha_delaney_a12(std::span<const double> a, std::span<const double> b);

enum class CorrelationMagnitude { Negligible, Low, Moderate, High, VeryHigh };

std::string_view magnitude_name(CorrelationMagnitude m) noexcept;
/// |rho| < 0.3 negligible, < 0.5 low, < 0.7 moderate, < 0.9 high, otherwise very high.
CorrelationMagnitude correlation_magnitude(double rho) noexcept;

struct Spearman {
    double rho = 0.0;
    double p = 1.0;
    CorrelationMagnitude magnitude = CorrelationMagnitude::Negligible;
};

/// Spearman's rho as the Pearson correlation of mid-ranks; p from the t
/// approximation with n - 2 degrees of freedom. Throws InputError when n < 3,
/// the sizes differ, or either input is constant (rho undefined).
Spearman spearman_rho(std::span<const double> x, std::span<const double> y);

struct MeanCi {
    double mean = 0.0;
    /// Half-width of the two-sided 95% t interval; 0 for a single value.
    double half_width = 0.0;
};

MeanCi mean_ci95(std::span<const double> values);

double median(std::span<const double> values);

}  // namespace episcen
