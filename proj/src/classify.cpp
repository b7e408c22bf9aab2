#include "masstest/classify.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace masstest {

FeatureMatrix::FeatureMatrix(std::size_t r, std::size_t c, std::vector<double> v)
    : rows(r), cols(c), values(std::move(v)) {
  if (values.size() != rows * cols) throw std::invalid_argument("feature matrix size mismatch");
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> idx) const {
  FeatureMatrix out(idx.size(), cols);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto src = row(idx[i]);
    std::copy(src.begin(), src.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * cols));
  }
  return out;
}

void zscore_fit_apply(FeatureMatrix& train, FeatureMatrix& test) {
  if (train.rows == 0) throw std::invalid_argument("z-score needs a non-empty training set");
  if (test.cols != train.cols) throw std::invalid_argument("train/test feature width mismatch");
  const auto n = static_cast<double>(train.rows);
  for (std::size_t c = 0; c < train.cols; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < train.rows; ++r) mean += train(r, c);
    mean /= n;
    double var = 0.0;
    for (std::size_t r = 0; r < train.rows; ++r) {
      const double d = train(r, c) - mean;
      var += d * d;
    }
    const double sd = std::sqrt(var / n);
    // Spread at rounding level of the mean counts as constant.
    const bool constant = !(sd > 1e-12 * std::max(1.0, std::abs(mean)));
    for (std::size_t r = 0; r < train.rows; ++r) train(r, c) = constant ? 0.0 : (train(r, c) - mean) / sd;
    for (std::size_t r = 0; r < test.rows; ++r) test(r, c) = constant ? 0.0 : (test(r, c) - mean) / sd;
  }
}

// ---------------------------------------------------------------------------
// Logistic regression

namespace {

double log1p_exp(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

double score(const LogisticModel& m, std::span<const double> row) {
  double s = m.intercept;
  for (std::size_t j = 0; j < row.size(); ++j) s += row[j] * m.weights[j];
  return s;
}

void check_inputs(const LogisticModel& model, const FeatureMatrix& f, std::span<const int> y) {
  if (y.size() != f.rows) throw std::invalid_argument("label count does not match feature rows");
  if (model.weights.size() != f.cols) throw std::invalid_argument("model width does not match features");
}

}  // namespace

double penalized_loss(const LogisticModel& model, const FeatureMatrix& f, std::span<const int> y,
                      double l2) {
  check_inputs(model, f, y);
  double loss = 0.0;
  for (std::size_t i = 0; i < f.rows; ++i) {
    const double s = score(model, f.row(i));
    loss += log1p_exp(s) - (y[i] == 1 ? s : 0.0);
  }
  double w2 = 0.0;
  for (const double w : model.weights) w2 += w * w;
  return loss + 0.5 * l2 * w2;
}

std::vector<double> penalized_gradient(const LogisticModel& model, const FeatureMatrix& f,
                                       std::span<const int> y, double l2) {
  check_inputs(model, f, y);
  std::vector<double> g(f.cols + 1, 0.0);
  for (std::size_t i = 0; i < f.rows; ++i) {
    const auto row = f.row(i);
    const double r = sigmoid(score(model, row)) - (y[i] == 1 ? 1.0 : 0.0);
    g[0] += r;
    for (std::size_t j = 0; j < f.cols; ++j) g[j + 1] += r * row[j];
  }
  for (std::size_t j = 0; j < f.cols; ++j) g[j + 1] += l2 * model.weights[j];
  return g;
}

LogisticFit train_logistic(const FeatureMatrix& f, std::span<const int> y,
                           const LogisticOptions& options) {
  if (y.size() != f.rows) throw std::invalid_argument("label count does not match feature rows");
  if (options.l2 < 0.0) throw std::invalid_argument("l2 penalty must be non-negative");
  bool seen[2] = {false, false};
  for (const int c : y) {
    if (c != 0 && c != 1) throw std::invalid_argument("labels must be 0 or 1");
    seen[c] = true;
  }
  if (!seen[0] || !seen[1]) throw std::invalid_argument("logistic regression needs both classes present");

  const std::size_t n = f.rows;
  const std::size_t d = f.cols + 1;
  // Design matrix with a leading intercept column.
  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd target(n);
  for (std::size_t i = 0; i < n; ++i) {
    x(static_cast<Eigen::Index>(i), 0) = 1.0;
    for (std::size_t j = 0; j < f.cols; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j + 1)) = f(i, j);
    target(static_cast<Eigen::Index>(i)) = y[i] == 1 ? 1.0 : 0.0;
  }
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), options.l2);
  penalty(0) = 0.0;

  auto objective = [&](const Eigen::VectorXd& beta) {
    const Eigen::VectorXd s = x * beta;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) loss += log1p_exp(s(i)) - target(i) * s(i);
    return loss + 0.5 * beta.cwiseProduct(penalty).dot(beta);
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  // Start the intercept at the log-odds of the class balance.
  const double p1 = target.mean();
  beta(0) = std::log(p1 / (1.0 - p1));

  LogisticFit fit;
  double loss = objective(beta);
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd s = x * beta;
    Eigen::VectorXd mu(s.size());
    Eigen::VectorXd w(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      mu(i) = sigmoid(s(i));
      w(i) = mu(i) * (1.0 - mu(i));
    }
    const Eigen::VectorXd grad = x.transpose() * (mu - target) + penalty.cwiseProduct(beta);
    fit.gradient_norm = grad.norm();
    fit.iterations = iter;
    if (fit.gradient_norm <= options.gradient_tolerance) {
      fit.converged = true;
      break;
    }

    Eigen::MatrixXd hessian = x.transpose() * w.asDiagonal() * x;
    hessian.diagonal() += penalty;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian);
    Eigen::VectorXd step;
    const bool newton_ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                           ldlt.vectorD().minCoeff() > 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff());
    if (newton_ok) {
      step = ldlt.solve(grad);
    } else {
      step = grad;
    }

    // Backtracking on the objective; the full Newton step is accepted when it
    // does not increase the loss.
    double t = 1.0;
    Eigen::VectorXd candidate = beta - step;
    double cand_loss = objective(candidate);
    while (cand_loss > loss && t > 1e-10) {
      t *= 0.5;
      candidate = beta - t * step;
      cand_loss = objective(candidate);
    }
    if (cand_loss > loss) break;  // no descent possible at machine precision
    beta = candidate;
    loss = cand_loss;
    fit.iterations = iter + 1;
  }

  // Final gradient at the returned parameters.
  {
    const Eigen::VectorXd s = x * beta;
    Eigen::VectorXd mu(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) mu(i) = sigmoid(s(i));
    const Eigen::VectorXd grad = x.transpose() * (mu - target) + penalty.cwiseProduct(beta);
    fit.gradient_norm = grad.norm();
    fit.converged = fit.gradient_norm <= options.gradient_tolerance;
  }

  fit.model.intercept = beta(0);
  fit.model.weights.assign(beta.data() + 1, beta.data() + d);
  return fit;
}

Prediction predict(const LogisticModel& model, const FeatureMatrix& f) {
  if (model.weights.size() != f.cols) {
    throw std::invalid_argument("model has " + std::to_string(model.weights.size()) +
                                " weights but features have " + std::to_string(f.cols) + " columns");
  }
  Prediction out;
  out.probability.resize(f.rows);
  out.label.resize(f.rows);
  for (std::size_t i = 0; i < f.rows; ++i) {
    const double p = sigmoid(score(model, f.row(i)));
    out.probability[i] = p;
    out.label[i] = p > 0.5 ? 1 : 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

std::string to_string(Metric metric) { return metric == Metric::kAccuracy ? "accuracy" : "f1"; }

Metric metric_from_string(const std::string& name) {
  if (name == "accuracy") return Metric::kAccuracy;
  if (name == "f1") return Metric::kF1;
  throw std::invalid_argument("unknown metric '" + name + "' (expected accuracy or f1)");
}

double accuracy_score(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size() || pred.empty()) throw std::invalid_argument("accuracy needs equal non-empty inputs");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

double f1_score(std::span<const int> pred, std::span<const int> truth, int positive) {
  if (pred.size() != truth.size() || pred.empty()) throw std::invalid_argument("f1 needs equal non-empty inputs");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] == positive;
    const bool t = truth[i] == positive;
    if (p && t) ++tp;
    else if (p) ++fp;
    else if (t) ++fn;
  }
  if (tp == 0) return 0.0;  // precision + recall == 0
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

// ---------------------------------------------------------------------------
// Cross-validation

std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("cross-validation needs k >= 2");
  std::vector<std::size_t> members[2];
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw std::invalid_argument("labels must be 0 or 1");
    members[y[i]].push_back(i);
  }
  for (const auto& m : members) {
    if (m.size() < k) {
      throw std::invalid_argument("k = " + std::to_string(k) + " exceeds the size of a class (" +
                                  std::to_string(m.size()) + " trials)");
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> fold(y.size(), 0);
  std::size_t deal = 0;
  for (auto& m : members) {
    // Fisher-Yates with an explicit draw so the permutation only depends on rng.
    for (std::size_t i = m.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(m[i - 1], m[j]);
    }
    for (const std::size_t idx : m) fold[idx] = deal++ % k;
  }
  return fold;
}

FoldAccuracies cross_validate(const FeatureMatrix& f, std::span<const int> y,
                              std::span<const std::size_t> folds, std::size_t k,
                              const CvOptions& options) {
  if (y.size() != f.rows || folds.size() != f.rows) throw std::invalid_argument("fold/label/feature size mismatch");
  FoldAccuracies out;
  out.metric = options.metric;
  out.values.reserve(k);
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::vector<int> y_train;
  std::vector<int> y_test;
  for (std::size_t fold = 0; fold < k; ++fold) {
    train_idx.clear();
    test_idx.clear();
    y_train.clear();
    y_test.clear();
    for (std::size_t i = 0; i < f.rows; ++i) {
      if (folds[i] == fold) {
        test_idx.push_back(i);
        y_test.push_back(y[i]);
      } else {
        train_idx.push_back(i);
        y_train.push_back(y[i]);
      }
    }
    if (test_idx.empty()) throw std::invalid_argument("fold " + std::to_string(fold) + " is empty");
    FeatureMatrix train = f.select_rows(train_idx);
    FeatureMatrix test = f.select_rows(test_idx);
    zscore_fit_apply(train, test);
    const auto fit = train_logistic(train, y_train, options.logistic);
    const auto pred = predict(fit.model, test);
    out.values.push_back(options.metric == Metric::kAccuracy ? accuracy_score(pred.label, y_test)
                                                             : f1_score(pred.label, y_test, 1));
  }
  return out;
}

FoldAccuracies stratified_kfold_cv(const FeatureMatrix& f, std::span<const int> y, std::size_t k,
                                   std::uint64_t seed, const CvOptions& options) {
  const auto folds = stratified_folds(y, k, seed);
  return cross_validate(f, y, folds, k, options);
}

std::size_t max_folds_for(std::size_t trials, std::size_t min_validation) {
  if (min_validation == 0) throw std::invalid_argument("min_validation must be positive");
  return trials / min_validation;
}

}  // namespace masstest
