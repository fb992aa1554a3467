#include "biastracer/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "biastracer/error.hpp"

namespace bt {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " contains a non-finite value");
  }
}

// Ranks are multiples of 0.5, so doubled ranks are exact integers.
long doubled(double rank) { return std::lround(2.0 * rank); }

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double wilcoxon_exact_p(std::span<const double> ranks, double w_plus) {
  long total = 0;
  for (double r : ranks) total += doubled(r);
  // counts[s] = number of sign assignments whose doubled positive-rank sum is s.
  std::vector<std::uint64_t> counts(static_cast<std::size_t>(total) + 1, 0);
  counts[0] = 1;
  long reach = 0;
  for (double r : ranks) {
    const long d = doubled(r);
    for (long s = reach; s >= 0; --s) {
      if (counts[static_cast<std::size_t>(s)]) counts[static_cast<std::size_t>(s + d)] += counts[static_cast<std::size_t>(s)];
    }
    reach += d;
  }
  const long w = doubled(w_plus);
  std::uint64_t lower = 0, upper = 0;
  for (long s = 0; s <= total; ++s) {
    if (s <= w) lower += counts[static_cast<std::size_t>(s)];
    if (s >= w) upper += counts[static_cast<std::size_t>(s)];
  }
  const double all = std::ldexp(1.0, static_cast<int>(ranks.size()));
  const double tail = static_cast<double>(std::min(lower, upper)) / all;
  return std::min(1.0, 2.0 * tail);
}

double wilcoxon_normal_p(std::span<const double> ranks, double w_plus) {
  const double n = static_cast<double>(ranks.size());
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted(ranks.begin(), ranks.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(w_plus - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::numbers::sqrt2));
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> before, std::span<const double> after) {
  if (before.size() != after.size()) {
    throw Error(ErrorCode::LengthMismatch, "before and after must have equal length");
  }
  if (before.empty()) throw Error(ErrorCode::EmptyInput, "paired sample is empty");
  require_finite(before, "before");
  require_finite(after, "after");

  std::vector<double> magnitude;
  std::vector<bool> positive;
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double d = after[i] - before[i];
    if (d == 0.0) continue;
    magnitude.push_back(std::abs(d));
    positive.push_back(d > 0.0);
  }
  if (magnitude.empty()) throw Error(ErrorCode::AllZeroDifferences, "every paired difference is zero");

  const auto ranks = average_ranks(magnitude);
  WilcoxonResult r;
  r.n = ranks.size();
  for (std::size_t i = 0; i < ranks.size(); ++i) (positive[i] ? r.w_plus : r.w_minus) += ranks[i];
  r.w_min = std::min(r.w_plus, r.w_minus);
  r.statistic = r.w_plus;
  r.exact = r.n <= kWilcoxonExactMax;
  r.p_value = r.exact ? wilcoxon_exact_p(ranks, r.w_plus) : wilcoxon_normal_p(ranks, r.w_plus);
  r.method_note = r.exact ? "exact" : "normal approximation (tie and continuity corrected)";
  return r;
}

double cliffs_delta(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw Error(ErrorCode::EmptyInput, "cliffs_delta needs two non-empty samples");
  std::vector<double> ys(y.begin(), y.end());
  std::sort(ys.begin(), ys.end());
  long long balance = 0;
  for (double v : x) {
    const auto lo = std::lower_bound(ys.begin(), ys.end(), v) - ys.begin();  // y < v
    const auto hi = ys.end() - std::upper_bound(ys.begin(), ys.end(), v);    // y > v
    balance += lo - hi;
  }
  return static_cast<double>(balance) / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

double cliffs_delta_paired(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::LengthMismatch, "paired samples differ in length");
  if (a.empty()) throw Error(ErrorCode::EmptyInput, "paired sample is empty");
  long long balance = 0;
  for (std::size_t i = 0; i < a.size(); ++i) balance += (a[i] > b[i]) - (a[i] < b[i]);
  return static_cast<double>(balance) / static_cast<double>(a.size());
}

TestResult spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::LengthMismatch, "spearman inputs differ in length");
  if (x.size() < 3) throw Error(ErrorCode::InvalidArgument, "spearman needs at least 3 pairs");
  require_finite(x, "x");
  require_finite(y, "y");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);

  auto has_ties = [](const std::vector<double>& r) {
    std::vector<double> s(r);
    std::sort(s.begin(), s.end());
    return std::adjacent_find(s.begin(), s.end()) != s.end();
  };
  auto constant = [](const std::vector<double>& r) {
    return std::all_of(r.begin(), r.end(), [&](double v) { return v == r.front(); });
  };
  if (constant(rx) || constant(ry)) throw Error(ErrorCode::ConstantInput, "spearman is undefined for constant input");

  double rho = 0.0;
  if (!has_ties(rx) && !has_ties(ry)) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) d2 += (rx[i] - ry[i]) * (rx[i] - ry[i]);
    rho = 1.0 - 6.0 * d2 / (nd * (nd * nd - 1.0));
  } else {
    const double mean = (nd + 1.0) / 2.0;  // mean of average ranks
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = rx[i] - mean, b = ry[i] - mean;
      sxy += a * b;
      sxx += a * a;
      syy += b * b;
    }
    rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  }

  TestResult r;
  r.statistic = rho;
  if (std::abs(rho) == 1.0) {
    r.p_value = std::min(1.0, std::exp(std::log(2.0) - std::lgamma(nd + 1.0)));
    r.method_note = "perfect rank agreement: permutation bound 2/n!";
  } else {
    const double t = rho * std::sqrt((nd - 2.0) / (1.0 - rho * rho));
    boost::math::students_t dist(nd - 2.0);
    r.p_value = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    r.method_note = "t approximation, n-2 degrees of freedom";
  }
  return r;
}

}  // namespace bt
