#include "masstest/mcp.hpp"

#include "masstest/parallel.hpp"
#include "masstest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace masstest {

void check_pvalues(std::span<const double> p) {
  if (p.empty()) throw std::invalid_argument("p-value vector is empty");
  for (const double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("p-values must lie in [0, 1]");
  }
}

std::size_t RejectionResult::count() const {
  return static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), true));
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

std::vector<std::size_t> ascending_order(std::span<const double> p) {
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
  return order;
}

RejectionResult start(const char* name, std::span<const double> p, double alpha) {
  check_pvalues(p);
  check_alpha(alpha);
  RejectionResult r;
  r.procedure = name;
  r.alpha = alpha;
  r.rejected.assign(p.size(), false);
  r.order = ascending_order(p);
  return r;
}

void reject_first(RejectionResult& r, std::size_t k) {
  r.cutoff = k;
  for (std::size_t i = 0; i < k; ++i) r.rejected[r.order[i]] = true;
}

// Largest rank i (1-based) with p_(i) <= threshold_i; 0 if none.
std::size_t step_up_cutoff(std::span<const double> p, const RejectionResult& r) {
  for (std::size_t i = r.order.size(); i > 0; --i) {
    if (p[r.order[i - 1]] <= r.thresholds[i - 1]) return i;
  }
  return 0;
}

RejectionResult linear_step_up(const char* name, std::span<const double> p, double alpha, double denom) {
  RejectionResult r = start(name, p, alpha);
  const auto m = static_cast<double>(p.size());
  r.thresholds.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) r.thresholds[i] = static_cast<double>(i + 1) / (m * denom) * alpha;
  reject_first(r, step_up_cutoff(p, r));
  return r;
}

}  // namespace

RejectionResult bonferroni(std::span<const double> p, double alpha) {
  RejectionResult r = start("bonferroni", p, alpha);
  const double threshold = alpha / static_cast<double>(p.size());
  r.thresholds = {threshold};
  for (std::size_t i = 0; i < p.size(); ++i) r.rejected[i] = p[i] <= threshold;
  r.cutoff = r.count();
  return r;
}

RejectionResult holm(std::span<const double> p, double alpha) {
  RejectionResult r = start("holm", p, alpha);
  const std::size_t m = p.size();
  r.thresholds.resize(m);
  for (std::size_t i = 0; i < m; ++i) r.thresholds[i] = alpha / static_cast<double>(m - i);
  std::size_t k = 0;
  while (k < m && p[r.order[k]] <= r.thresholds[k]) ++k;
  reject_first(r, k);
  return r;
}

RejectionResult bh(std::span<const double> p, double alpha) { return linear_step_up("bh", p, alpha, 1.0); }

RejectionResult by(std::span<const double> p, double alpha) {
  check_pvalues(p);
  return linear_step_up("by", p, alpha, harmonic_number(p.size()));
}

RejectionResult bky(std::span<const double> p, double alpha) {
  check_pvalues(p);
  check_alpha(alpha);
  const std::size_t m = p.size();
  const double a1 = alpha / (1.0 + alpha);
  const RejectionResult stage1 = bh(p, a1);
  const std::size_t r1 = stage1.count();

  RejectionResult r;
  if (r1 == 0 || r1 == m) {
    r = stage1;
    if (r1 == m) reject_first(r, m);
  } else {
    const double a2 = static_cast<double>(m) / static_cast<double>(m + r1) * a1;
    r = bh(p, a2);
    r.alpha_double_prime = a2;
  }
  r.procedure = "bky";
  r.alpha = alpha;
  r.alpha_prime = a1;
  r.stage1_rejections = r1;
  r.note = "second stage alpha'' = m / (m + r1) * alpha'";
  return r;
}

RejectionResult correct(const std::string& method, std::span<const double> p, double alpha) {
  if (method == "bonferroni") return bonferroni(p, alpha);
  if (method == "holm") return holm(p, alpha);
  if (method == "bh") return bh(p, alpha);
  if (method == "by") return by(p, alpha);
  if (method == "bky") return bky(p, alpha);
  throw std::invalid_argument("unknown correction method '" + method + "'");
}

double harmonic_number(std::size_t m) {
  double h = 0.0;
  for (std::size_t j = m; j >= 1; --j) h += 1.0 / static_cast<double>(j);
  return h;
}

// ---------------------------------------------------------------------------
// Mass two-sample t

DataMatrix as_matrix(const TFRTensor& tensor) {
  return {tensor.power(), tensor.shape().trials, tensor.shape().variables(), tensor.labels().codes()};
}

MassTStatistic::MassTStatistic(const DataMatrix& data)
    : trials_(data.trials), variables_(data.variables) {
  if (data.values.size() != trials_ * variables_ || data.labels.size() != trials_) {
    throw std::invalid_argument("data matrix size mismatch");
  }
  std::vector<double> mean(variables_, 0.0);
  for (std::size_t r = 0; r < trials_; ++r) {
    const double* row = data.values.data() + r * variables_;
    for (std::size_t v = 0; v < variables_; ++v) mean[v] += row[v];
  }
  for (auto& m : mean) m /= static_cast<double>(trials_);
  centered_.resize(trials_ * variables_);
  total_sq_.assign(variables_, 0.0);
  for (std::size_t r = 0; r < trials_; ++r) {
    const double* row = data.values.data() + r * variables_;
    double* out = centered_.data() + r * variables_;
    for (std::size_t v = 0; v < variables_; ++v) {
      out[v] = row[v] - mean[v];
      total_sq_[v] += out[v] * out[v];
    }
  }
  for (std::size_t r = 0; r < trials_; ++r) {
    if (data.labels[r] == 1) observed_a_.push_back(r);
  }
}

void MassTStatistic::compute(std::span<const std::size_t> group_a, std::span<double> t_out,
                             std::vector<double>& sum, std::vector<double>& sq) const {
  const std::size_t na = group_a.size();
  const std::size_t nb = trials_ - na;
  if (na < 2 || nb < 2) throw std::invalid_argument("each condition needs at least 2 trials");
  sum.assign(variables_, 0.0);
  sq.assign(variables_, 0.0);
  for (const std::size_t r : group_a) {
    const double* row = centered_.data() + r * variables_;
    for (std::size_t v = 0; v < variables_; ++v) {
      sum[v] += row[v];
      sq[v] += row[v] * row[v];
    }
  }
  const double fa = static_cast<double>(na);
  const double fb = static_cast<double>(nb);
  const double dof = fa + fb - 2.0;
  const double scale = std::sqrt(1.0 / fa + 1.0 / fb);
  for (std::size_t v = 0; v < variables_; ++v) {
    // The centered column sums to zero, so the other group's sum is -sum.
    const double sa = sum[v];
    const double sb = -sa;
    const double ss_within = (sq[v] - sa * sa / fa) + ((total_sq_[v] - sq[v]) - sb * sb / fb);
    const double pooled = ss_within / dof;
    if (!(pooled > 1e-13 * total_sq_[v] / static_cast<double>(trials_)) || total_sq_[v] == 0.0) {
      t_out[v] = 0.0;
      continue;
    }
    const double diff = sa / fa - sb / fb;
    t_out[v] = diff / (std::sqrt(pooled) * scale);
  }
}

void MassTStatistic::observed(std::span<double> t_out) const {
  std::vector<double> s, q;
  compute(observed_a_, t_out, s, q);
}

// ---------------------------------------------------------------------------
// Relabelling

namespace {

constexpr std::size_t kMaxExhaustive = 5'000'000;

std::size_t binomial_capped(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) {
    c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
    if (c > static_cast<double>(kMaxExhaustive)) return kMaxExhaustive + 1;
  }
  return static_cast<std::size_t>(std::llround(c));
}

// index-th k-subset of {0..n-1} in lexicographic order.
void unrank_combination(std::size_t n, std::size_t k, std::size_t index, std::vector<std::size_t>& out) {
  out.clear();
  std::size_t next = 0;
  for (std::size_t slot = 0; slot < k; ++slot) {
    for (std::size_t c = next;; ++c) {
      const std::size_t with_c = binomial_capped(n - c - 1, k - slot - 1);
      if (index < with_c) {
        out.push_back(c);
        next = c + 1;
        break;
      }
      index -= with_c;
    }
  }
}

}  // namespace

RelabelGenerator::RelabelGenerator(std::size_t trials, std::size_t group_a_size, const PermutationScheme& scheme)
    : trials_(trials), na_(group_a_size), scheme_(scheme) {
  if (scheme.exhaustive) {
    count_ = binomial_capped(trials, group_a_size);
    if (count_ > kMaxExhaustive) throw std::invalid_argument("too many relabellings for exhaustive enumeration");
  } else {
    if (scheme.n_perm < 1) throw std::invalid_argument("n_perm must be at least 1");
    count_ = scheme.n_perm;
  }
}

void RelabelGenerator::draw(std::size_t index, std::vector<std::size_t>& group_a) const {
  if (scheme_.exhaustive) {
    unrank_combination(trials_, na_, index, group_a);
    return;
  }
  std::mt19937_64 rng(derive_seed(scheme_.seed, {index}));
  std::vector<std::size_t> idx(trials_);
  std::iota(idx.begin(), idx.end(), 0);
  // Partial Fisher-Yates: the first na slots form the relabelled group.
  for (std::size_t i = 0; i < na_; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (trials_ - i));
    std::swap(idx[i], idx[j]);
  }
  group_a.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(na_));
  std::sort(group_a.begin(), group_a.end());
}

// ---------------------------------------------------------------------------
// Permutation nulls

namespace {

constexpr double kTieSlack = 1e-12;

// rank-th largest (1-based) of |t| (two-tailed) or t (upper tail).
double order_statistic(std::span<const double> t, std::size_t rank, bool two_tailed, std::vector<double>& scratch) {
  if (rank == 1) {
    double best = -std::numeric_limits<double>::infinity();
    for (const double v : t) best = std::max(best, two_tailed ? std::abs(v) : v);
    return best;
  }
  scratch.resize(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) scratch[i] = two_tailed ? std::abs(t[i]) : t[i];
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(rank - 1), scratch.end(),
                   std::greater<double>());
  return scratch[rank - 1];
}

struct NullDistribution {
  std::vector<double> observed_t;
  std::vector<double> stats;  // per relabelling
};

NullDistribution permutation_null(const DataMatrix& data, std::size_t rank, const PermutationScheme& scheme) {
  const MassTStatistic mass(data);
  const std::size_t na = mass.observed_group().size();
  if (na < 2 || data.trials - na < 2) throw std::invalid_argument("each condition needs at least 2 trials");
  if (rank < 1 || rank > data.variables) throw std::invalid_argument("order statistic rank out of range");
  const RelabelGenerator gen(data.trials, na, scheme);

  NullDistribution out;
  out.observed_t.resize(data.variables);
  mass.observed(out.observed_t);
  out.stats.resize(gen.count());

  constexpr std::size_t kBlock = 8;
  const std::size_t blocks = (gen.count() + kBlock - 1) / kBlock;
  parallel_for(blocks, scheme.threads, [&](std::size_t b) {
    std::vector<std::size_t> group;
    std::vector<double> t(data.variables), s, q, scratch;
    const std::size_t end = std::min(gen.count(), (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      gen.draw(i, group);
      mass.compute(group, t, s, q);
      out.stats[i] = order_statistic(t, rank, scheme.two_tailed, scratch);
    }
  });
  return out;
}

double exceedance_p(double observed, std::span<const double> null_stats, bool exhaustive) {
  const double bar = observed - kTieSlack * std::abs(observed);
  std::size_t hits = 0;
  for (const double s : null_stats) hits += s >= bar ? 1 : 0;
  if (exhaustive) return static_cast<double>(hits) / static_cast<double>(null_stats.size());
  return static_cast<double>(hits + 1) / static_cast<double>(null_stats.size() + 1);
}

}  // namespace

TmaxResult tmax_test(const DataMatrix& data, const PermutationScheme& scheme) {
  auto null = permutation_null(data, 1, scheme);
  TmaxResult out;
  out.observed_t = std::move(null.observed_t);
  out.null_max = std::move(null.stats);
  out.n_reference = scheme.exhaustive ? out.null_max.size() : out.null_max.size() + 1;
  out.p.resize(out.observed_t.size());
  for (std::size_t v = 0; v < out.observed_t.size(); ++v) {
    const double obs = scheme.two_tailed ? std::abs(out.observed_t[v]) : out.observed_t[v];
    out.p[v] = exceedance_p(obs, out.null_max, scheme.exhaustive);
  }
  return out;
}

TmaxResult tmax_test(const TFRTensor& tensor, const PermutationScheme& scheme) {
  return tmax_test(as_matrix(tensor), scheme);
}

KtmsResult ktms(const DataMatrix& data, std::size_t u, double alpha, const PermutationScheme& scheme) {
  check_alpha(alpha);
  if (u >= data.variables) throw std::invalid_argument("u must be smaller than the number of hypotheses");
  auto null = permutation_null(data, u + 1, scheme);

  KtmsResult out;
  out.observed_t = std::move(null.observed_t);
  const std::size_t m = out.observed_t.size();
  auto magnitude = [&](std::size_t v) {
    return scheme.two_tailed ? std::abs(out.observed_t[v]) : out.observed_t[v];
  };

  RejectionResult& r = out.rejection;
  r.procedure = "ktms";
  r.alpha = alpha;
  r.rejected.assign(m, false);
  r.order.resize(m);
  std::iota(r.order.begin(), r.order.end(), 0);
  // Most extreme statistic first == smallest p first.
  std::stable_sort(r.order.begin(), r.order.end(),
                   [&](std::size_t a, std::size_t b) { return magnitude(a) > magnitude(b); });
  out.adjusted_p.assign(m, 1.0);
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t v = r.order[i];
    if (i < u) {
      r.rejected[v] = true;
      out.adjusted_p[v] = 0.0;
      continue;
    }
    out.adjusted_p[v] = exceedance_p(magnitude(v), null.stats, scheme.exhaustive);
    r.rejected[v] = out.adjusted_p[v] <= alpha;
  }
  r.cutoff = r.count();
  r.note = "u = " + std::to_string(u);
  return out;
}

KtmsResult ktms(const TFRTensor& tensor, std::size_t u, double alpha, const PermutationScheme& scheme) {
  return ktms(as_matrix(tensor), u, alpha, scheme);
}

PValueVector mass_t_pvalues(const DataMatrix& data) {
  const MassTStatistic mass(data);
  std::vector<double> t(data.variables);
  mass.observed(t);
  const double dof = static_cast<double>(data.trials) - 2.0;
  PValueVector p(t.size());
  for (std::size_t v = 0; v < t.size(); ++v) p[v] = std::min(1.0, 2.0 * t_tail(std::abs(t[v]), dof));
  return p;
}

}  // namespace masstest
