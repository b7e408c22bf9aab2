#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace masstest {

// Row-major trials x features.
struct FeatureMatrix {
  std::size_t rows{0};
  std::size_t cols{0};
  std::vector<double> values;

  FeatureMatrix() = default;
  FeatureMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), values(r * c, 0.0) {}
  FeatureMatrix(std::size_t r, std::size_t c, std::vector<double> v);

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * cols, cols);
  }
  // Rows selected by index, in the given order.
  FeatureMatrix select_rows(std::span<const std::size_t> idx) const;
};

// Per-feature standardisation fitted on `train` (population std) and applied
// to both matrices in place. Features with zero training spread map to 0.
void zscore_fit_apply(FeatureMatrix& train, FeatureMatrix& test);

// P(class 1 | f) = 1 / (1 + exp(-(intercept + f . weights))).
struct LogisticModel {
  double intercept{0.0};
  std::vector<double> weights;
};

struct LogisticOptions {
  double l2{1.0};  // ridge penalty on the weights (not the intercept)
  double gradient_tolerance{1e-6};
  int max_iterations{500};
};

struct LogisticFit {
  LogisticModel model;
  int iterations{0};
  double gradient_norm{0.0};
  bool converged{false};
};

// Penalised negative log-likelihood
//   sum_i [log(1 + e^{s_i}) - y_i s_i] + l2/2 |w|^2,  s_i = b + f_i . w
// and its gradient (intercept first).
double penalized_loss(const LogisticModel& model, const FeatureMatrix& f, std::span<const int> y,
                      double l2);
std::vector<double> penalized_gradient(const LogisticModel& model, const FeatureMatrix& f,
                                       std::span<const int> y, double l2);

// Newton iterations with step halving; falls back to a gradient step when the
// Hessian is not positive definite. Deterministic in (f, y, options).
// Labels are 0/1; throws std::invalid_argument when only one class is present
// or sizes disagree.
LogisticFit train_logistic(const FeatureMatrix& f, std::span<const int> y,
                           const LogisticOptions& options = {});

struct Prediction {
  std::vector<double> probability;  // P(class 1)
  std::vector<int> label;           // 1 iff probability > 0.5
};

Prediction predict(const LogisticModel& model, const FeatureMatrix& f);

enum class Metric { kAccuracy, kF1 };

std::string to_string(Metric metric);
Metric metric_from_string(const std::string& name);

double accuracy_score(std::span<const int> pred, std::span<const int> truth);
// Harmonic mean of precision and recall for `positive`; 0 when both are 0.
double f1_score(std::span<const int> pred, std::span<const int> truth, int positive = 1);

struct FoldAccuracies {
  std::vector<double> values;  // one per fold, fold order
  Metric metric{Metric::kAccuracy};
};

// Fold index per trial. Trials of each class are shuffled with `seed` and
// dealt round-robin over the folds (the deal continues across classes), so
// every fold's class counts are within one of the overall proportion.
// Throws std::invalid_argument when k < 2 or a class has fewer than k members.
std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t k, std::uint64_t seed);

struct CvOptions {
  Metric metric{Metric::kAccuracy};
  LogisticOptions logistic{};
};

// Cross-validation over a given fold assignment: for each fold, z-scoring and
// training use the other folds only, and the metric is computed on the fold.
FoldAccuracies cross_validate(const FeatureMatrix& f, std::span<const int> y,
                              std::span<const std::size_t> folds, std::size_t k,
                              const CvOptions& options = {});

FoldAccuracies stratified_kfold_cv(const FeatureMatrix& f, std::span<const int> y, std::size_t k,
                                   std::uint64_t seed, const CvOptions& options = {});

// Largest k keeping at least `min_validation` trials per fold.
std::size_t max_folds_for(std::size_t trials, std::size_t min_validation = 10);

}  // namespace masstest
