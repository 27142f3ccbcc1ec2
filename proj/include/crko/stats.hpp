#pragma once

// Binomial confidence intervals and the chi-square goodness-of-fit test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>

#include <boost/math/distributions/chi_squared.hpp>

namespace crko {

inline constexpr double kZ95 = 1.959963984540054;

struct Proportion {
  std::uint64_t hits = 0;
  std::uint64_t total = 0;
  double estimate = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval.
inline Proportion wilson(std::uint64_t hits, std::uint64_t total, double z = kZ95) {
  Proportion p{hits, total, 0.0, 0.0, 1.0};
  if (total == 0) return p;
  const double nn = static_cast<double>(total);
  const double ph = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (ph + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn)) / denom;
  p.estimate = ph;
  p.lo = std::max(0.0, centre - half);
  p.hi = std::min(1.0, centre + half);
  if (hits == 0) p.lo = 0.0;
  if (hits == total) p.hi = 1.0;
  return p;
}

struct Difference {
  double estimate = 0.0;  // p1 - p2
  double lo = 0.0;
  double hi = 0.0;
};

/// Newcombe hybrid score interval for p1 - p2 from two independent samples.
inline Difference two_proportion(const Proportion& a, const Proportion& b, double z = kZ95) {
  const Proportion wa = wilson(a.hits, a.total, z);
  const Proportion wb = wilson(b.hits, b.total, z);
  const double d = wa.estimate - wb.estimate;
  const double lo = d - std::sqrt((wa.estimate - wa.lo) * (wa.estimate - wa.lo) +
                                  (wb.hi - wb.estimate) * (wb.hi - wb.estimate));
  const double hi = d + std::sqrt((wa.hi - wa.estimate) * (wa.hi - wa.estimate) +
                                  (wb.estimate - wb.lo) * (wb.estimate - wb.lo));
  return {d, std::max(-1.0, lo), std::min(1.0, hi)};
}

struct ChiSquare {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
};

/// Goodness of fit of `counts` against the uniform distribution on its cells.
inline ChiSquare chi_square_uniform(std::span<const std::uint64_t> counts) {
  ChiSquare r;
  if (counts.size() < 2) return r;
  std::uint64_t total = 0;
  for (auto c : counts) total += c;
  const double expected = static_cast<double>(total) / static_cast<double>(counts.size());
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    r.statistic += d * d / expected;
  }
  r.dof = static_cast<double>(counts.size() - 1);
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

}  // namespace crko
