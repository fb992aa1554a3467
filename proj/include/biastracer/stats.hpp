#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bt {

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::optional<double> effect_size;
  std::string method_note;  // "exact", "normal approximation", ...
};

struct WilcoxonResult : TestResult {
  double w_plus = 0.0;   // sum of ranks of positive differences (= statistic)
  double w_minus = 0.0;
  double w_min = 0.0;    // min(W+, W-), the other common convention
  std::size_t n = 0;     // nonzero differences used
  bool exact = false;
};

// Largest n (after dropping zero differences) for which the exact null
// distribution is used.
inline constexpr std::size_t kWilcoxonExactMax = 25;

// Differences are after - before. Zero differences are dropped, |d| is ranked
// with average ranks. Throws AllZeroDifferences, LengthMismatch, EmptyInput.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> before, std::span<const double> after);

// Two-sided p for W+ given the absolute-difference ranks, by exact
// enumeration of the 2^n sign assignments (computed as a rank-sum DP).
double wilcoxon_exact_p(std::span<const double> ranks, double w_plus);

// Normal approximation with tie and continuity correction.
double wilcoxon_normal_p(std::span<const double> ranks, double w_plus);

// Average ranks (1-based) of values; ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// (#{x_i > y_j} - #{x_i < y_j}) / (|x| |y|). Throws EmptyInput.
double cliffs_delta(std::span<const double> x, std::span<const double> y);

// Paired dominance: (#{a_i > b_i} - #{a_i < b_i}) / n. Throws EmptyInput,
// LengthMismatch.
double cliffs_delta_paired(std::span<const double> a, std::span<const double> b);

// Spearman rho with two-tailed p from Student's t on n-2 degrees of freedom;
// |rho| = 1 gives p = 2/n!. Throws LengthMismatch, InvalidArgument (n < 3),
// ConstantInput.
TestResult spearman(std::span<const double> x, std::span<const double> y);

}  // namespace bt
