#include "masstest/stats.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>

namespace masstest {

double t_tail(double t, double dof) {
  if (!(dof >= 1.0)) throw std::invalid_argument("t distribution needs dof >= 1");
  if (std::isnan(t)) throw std::invalid_argument("t statistic is NaN");
  if (t == 0.0) return 0.5;
  if (std::isinf(t)) return t > 0.0 ? 0.0 : 1.0;
  // P(|T| >= |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2)
  const double x = dof / (dof + t * t);
  const double two_sided = boost::math::ibeta(dof / 2.0, 0.5, x);
  return t > 0.0 ? 0.5 * two_sided : 1.0 - 0.5 * two_sided;
}

double t_critical(double upper_tail, double dof) {
  if (!(upper_tail > 0.0 && upper_tail < 1.0)) throw std::invalid_argument("tail probability must be in (0, 1)");
  if (!(dof >= 1.0)) throw std::invalid_argument("t distribution needs dof >= 1");
  const boost::math::students_t dist(dof);
  return boost::math::quantile(boost::math::complement(dist, upper_tail));
}

TTestResult one_sample_t(std::span<const double> values, double mu) {
  const std::size_t k = values.size();
  if (k < 2) throw std::invalid_argument("one-sample t-test needs at least 2 values");
  double mean = 0.0;
  for (const double v : values) mean += v;
  mean /= static_cast<double>(k);
  double ss = 0.0;
  for (const double v : values) ss += (v - mean) * (v - mean);
  const double s = std::sqrt(ss / static_cast<double>(k - 1));

  TTestResult out;
  out.dof = static_cast<double>(k - 1);
  const double diff = mean - mu;
  // Spread at rounding level of the values counts as zero variance.
  if (!(s > 1e-14 * std::max(1.0, std::abs(mean)))) {
    out.degenerate = true;
    if (diff > 0.0) {
      out.t = std::numeric_limits<double>::infinity();
      out.p = 0.0;
    } else if (diff < 0.0) {
      out.t = -std::numeric_limits<double>::infinity();
      out.p = 1.0;
    } else {
      out.t = 0.0;
      out.p = 0.5;
    }
    return out;
  }
  out.t = diff / (s / std::sqrt(static_cast<double>(k)));
  out.p = t_tail(out.t, out.dof);
  return out;
}

TwoSampleT two_sample_t(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("two-sample t needs at least 2 values per group");
  auto moments = [](std::span<const double> x, double& mean, double& ss) {
    mean = 0.0;
    for (const double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    ss = 0.0;
    for (const double v : x) ss += (v - mean) * (v - mean);
  };
  double ma, ssa, mb, ssb;
  moments(a, ma, ssa);
  moments(b, mb, ssb);
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double pooled = (ssa + ssb) / (na + nb - 2.0);
  TwoSampleT out;
  const double diff = ma - mb;
  if (!(pooled > 0.0)) {
    if (diff == 0.0) return out;
    out.degenerate = true;
    out.t = diff > 0.0 ? std::numeric_limits<double>::max() : -std::numeric_limits<double>::max();
    return out;
  }
  out.t = diff / (std::sqrt(pooled) * std::sqrt(1.0 / na + 1.0 / nb));
  return out;
}

}  // namespace masstest
