#pragma once

#include "masstest/classify.hpp"

#include <span>

namespace masstest {

struct TTestResult {
  double t{0.0};
  double dof{1.0};
  double p{0.5};  // one-sided upper tail P(T >= t)
  // Zero sample variance: t is +/-inf (or 0) and p is 0, 1 or 0.5.
  bool degenerate{false};
};

// P(T >= t) for Student's t with `dof` degrees of freedom, via the regularised
// incomplete beta function. Throws std::invalid_argument when dof < 1.
double t_tail(double t, double dof);

// Upper critical value c with P(T >= c) = upper_tail.
double t_critical(double upper_tail, double dof);

// t = (mean - mu) / (s / sqrt(k)), s with divisor k - 1, dof = k - 1.
TTestResult one_sample_t(std::span<const double> values, double mu);
inline TTestResult one_sample_t(const FoldAccuracies& acc, double mu) {
  return one_sample_t(acc.values, mu);
}

struct TwoSampleT {
  double t{0.0};
  // Pooled variance is zero while the means differ; t is +/- max double.
  bool degenerate{false};
};

// Pooled-variance independent two-sample t, (mean a - mean b) / (s_p sqrt(1/na + 1/nb)).
// Throws std::invalid_argument when either sample has fewer than 2 values.
TwoSampleT two_sample_t(std::span<const double> a, std::span<const double> b);

}  // namespace masstest
