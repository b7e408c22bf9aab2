#pragma once

#include "masstest/core_data.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace masstest {

using PValueVector = std::vector<double>;

// Throws std::invalid_argument when empty or any value lies outside [0, 1].
void check_pvalues(std::span<const double> p);

struct RejectionResult {
  std::vector<bool> rejected;  // one flag per hypothesis, input order
  std::string procedure;
  double alpha{0.05};
  // Indices sorted by ascending p (ties by index), for reporting.
  std::vector<std::size_t> order;
  // Critical value per rank of `order` (step procedures) or the single
  // per-test threshold (Bonferroni).
  std::vector<double> thresholds;
  // Number of rejections (the step-up cutoff k for BH/BY/BKY).
  std::size_t cutoff{0};
  // BKY stage values.
  std::optional<double> alpha_prime;
  std::optional<double> alpha_double_prime;
  std::optional<std::size_t> stage1_rejections;
  std::string note;

  std::size_t count() const;
};

RejectionResult bonferroni(std::span<const double> p, double alpha);
RejectionResult holm(std::span<const double> p, double alpha);
RejectionResult bh(std::span<const double> p, double alpha);
RejectionResult by(std::span<const double> p, double alpha);
// Two-stage adaptive: BH at alpha' = alpha/(1+alpha); with r1 first-stage
// rejections, none if r1 = 0, all if r1 = m, otherwise BH at
// alpha'' = m/(m + r1) * alpha'.
RejectionResult bky(std::span<const double> p, double alpha);

// Dispatch by name: bonferroni, holm, bh, by, bky.
RejectionResult correct(const std::string& method, std::span<const double> p, double alpha);

double harmonic_number(std::size_t m);

// ---------------------------------------------------------------------------
// Permutation procedures on a trials x variables matrix.

struct PermutationScheme {
  std::size_t n_perm{1000};
  std::uint64_t seed{0};
  bool two_tailed{true};
  // Enumerate every relabelling with the observed group sizes instead of
  // sampling; n_perm is ignored.
  bool exhaustive{false};
  int threads{1};
};

// Row-major trials x variables view with 0/1 condition codes.
struct DataMatrix {
  std::span<const double> values;
  std::size_t trials{0};
  std::size_t variables{0};
  std::span<const int> labels;
};

DataMatrix as_matrix(const TFRTensor& tensor);

// Per-variable pooled two-sample t of label 1 versus label 0 for arbitrary
// relabellings. Works on sums over one group, so each relabelling costs one
// pass over that group's rows. Zero-variance variables get t = 0.
class MassTStatistic {
 public:
  explicit MassTStatistic(const DataMatrix& data);

  std::size_t variables() const { return variables_; }
  std::size_t trials() const { return trials_; }
  // `group_a` lists the trials of condition 1; the rest form condition 0.
  void compute(std::span<const std::size_t> group_a, std::span<double> t_out,
               std::vector<double>& scratch_sum, std::vector<double>& scratch_sq) const;
  void observed(std::span<double> t_out) const;
  std::span<const std::size_t> observed_group() const { return observed_a_; }

 private:
  std::size_t trials_, variables_;
  std::vector<double> centered_;  // data minus per-variable mean
  std::vector<double> total_sq_;  // per-variable sum of squares of centered_
  std::vector<std::size_t> observed_a_;
};

// Enumerates / samples relabellings (group_a index lists). Permutation i of a
// Monte-Carlo scheme is a shuffle seeded by derive_seed(seed, {i}); exhaustive
// schemes list subsets in lexicographic order.
class RelabelGenerator {
 public:
  RelabelGenerator(std::size_t trials, std::size_t group_a_size, const PermutationScheme& scheme);
  std::size_t count() const { return count_; }
  void draw(std::size_t index, std::vector<std::size_t>& group_a) const;

 private:
  std::size_t trials_, na_;
  PermutationScheme scheme_;
  std::size_t count_;
};

struct TmaxResult {
  std::vector<double> observed_t;  // per variable
  PValueVector p;                  // per variable
  std::vector<double> null_max;    // per relabelling
  std::size_t n_reference{0};      // size of the reference set used in p
};

// t_max permutation test. Monte-Carlo p = (1 + #{max >= |t_obs|}) / (n_perm + 1);
// exhaustive p = #{max >= |t_obs|} / N over all N relabellings (observed one
// included). Comparisons allow a relative slack of 1e-12 so exact ties in
// exact arithmetic stay ties. Throws std::invalid_argument for fewer than two
// trials per condition.
TmaxResult tmax_test(const DataMatrix& data, const PermutationScheme& scheme);
TmaxResult tmax_test(const TFRTensor& tensor, const PermutationScheme& scheme);

struct KtmsResult {
  RejectionResult rejection;
  std::vector<double> observed_t;
  PValueVector adjusted_p;  // 0 for the u auto-rejected hypotheses
};

// Generalised FWER (KTMS): the u hypotheses with the largest |t| are rejected
// outright; the rest are compared against the per-relabelling (u+1)-th largest
// |t| and rejected when the resulting p <= alpha. Throws when u >= m.
KtmsResult ktms(const DataMatrix& data, std::size_t u, double alpha, const PermutationScheme& scheme);
KtmsResult ktms(const TFRTensor& tensor, std::size_t u, double alpha, const PermutationScheme& scheme);

// Two-tailed parametric p-values of the per-variable pooled two-sample t.
PValueVector mass_t_pvalues(const DataMatrix& data);

}  // namespace masstest
