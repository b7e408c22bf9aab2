#include "masstest/pipeline.hpp"

#include "masstest/dct.hpp"
#include "masstest/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <set>
#include <stdexcept>

namespace masstest {

namespace {

constexpr std::size_t kRecommendedTrials = 150;
constexpr std::size_t kMinValidationTrials = 10;

}  // namespace

double chance_level(const PipelineConfig& cfg) {
  if (cfg.mu) return *cfg.mu;
  if (cfg.metric == Metric::kAccuracy) return 0.5;
  throw std::invalid_argument("the F1 metric needs an explicit chance level (mu)");
}

std::vector<std::string> check_pipeline_config(const PipelineConfig& cfg, const TFRTensor& tensor) {
  if (!(cfg.alpha > 0.0 && cfg.alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
  if (cfg.k < 2) throw std::invalid_argument("k must be at least 2");
  if (cfg.u < 1 || cfg.v < 1) throw std::invalid_argument("u and v must be at least 1");
  if (cfg.l2 < 0.0) throw std::invalid_argument("l2 must be non-negative");
  const double mu = chance_level(cfg);
  if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must lie in [0, 1]");

  const auto& s = tensor.shape();
  if (cfg.u > s.freqs || cfg.v > s.times) {
    throw std::invalid_argument("DCT mask " + std::to_string(cfg.u) + "x" + std::to_string(cfg.v) +
                                " exceeds the " + std::to_string(s.freqs) + "x" + std::to_string(s.times) + " grid");
  }
  if (cfg.u > s.times) throw std::invalid_argument("u exceeds the number of time bins (step 2 mask)");
  const auto& labels = tensor.labels();
  const std::size_t smallest = std::min(labels.count(0), labels.count(1));
  if (smallest < 2 * cfg.k) {
    throw std::invalid_argument("each condition needs at least 2k = " + std::to_string(2 * cfg.k) +
                                " trials; the smaller one has " + std::to_string(smallest));
  }

  std::vector<std::string> warnings;
  if (s.trials < kRecommendedTrials) {
    warnings.push_back("dataset has " + std::to_string(s.trials) + " trials; at least " +
                       std::to_string(kRecommendedTrials) + " are recommended");
  }
  if (cfg.k < 15 || cfg.k > 25) {
    warnings.push_back("k = " + std::to_string(cfg.k) + " is outside the recommended range 15..25");
  }
  if (s.trials / cfg.k < kMinValidationTrials) {
    warnings.push_back("validation folds hold fewer than " + std::to_string(kMinValidationTrials) +
                       " trials; k <= " + std::to_string(max_folds_for(s.trials, kMinValidationTrials)) +
                       " keeps at least that many");
  }
  if (cfg.u < 3 || cfg.u > 7 || cfg.v < 3 || cfg.v > 7) {
    warnings.push_back("DCT mask " + std::to_string(cfg.u) + "x" + std::to_string(cfg.v) +
                       " is outside the recommended range 3..7");
  }
  return warnings;
}

int stop_stage_code(StopStage s) { return static_cast<int>(s); }

PValueVector StepResult::pvalues() const {
  PValueVector p;
  p.reserve(tests.size());
  for (const auto& t : tests) p.push_back(t.ttest.p);
  return p;
}

bool SignificanceSets::nested() const {
  const std::set<std::size_t> channels(sc.begin(), sc.end());
  const std::set<ChannelFreq> pairs(scf.begin(), scf.end());
  for (const auto& [c, f] : scf) {
    if (!channels.count(c)) return false;
  }
  for (const auto& v : scft) {
    if (!pairs.count({v.channel, v.freq})) return false;
  }
  return true;
}

std::size_t PipelineReport::tests_run(int step) const {
  for (const auto& s : steps) {
    if (s.step == step) return s.tests.size();
  }
  return 0;
}

namespace {

// Runs one cross-validated test per `where`, building features with `fill`.
// The fold partition of each test is drawn from a seed derived from the step
// and the test coordinates, so results do not depend on loop order.
template <class Fill>
StepResult run_step(int step, const TFRTensor& tensor, const PipelineConfig& cfg,
                    const std::vector<VariableIndex>& where, std::size_t width, Fill fill) {
  const double mu = chance_level(cfg);
  const auto labels = tensor.labels().codes();
  const std::size_t trials = tensor.shape().trials;
  CvOptions cv;
  cv.metric = cfg.metric;
  cv.logistic.l2 = cfg.l2;

  const auto started = std::chrono::steady_clock::now();
  StepResult out;
  out.step = step;
  out.tests.resize(where.size());
  parallel_for(where.size(), cfg.threads, [&](std::size_t i) {
    const VariableIndex& w = where[i];
    FeatureMatrix features(trials, width);
    for (std::size_t r = 0; r < trials; ++r) {
      fill(r, w, std::span<double>(features.values).subspan(r * width, width));
    }
    const std::uint64_t seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(step), w.channel, w.freq, w.time});
    TestRecord& rec = out.tests[i];
    rec.where = w;
    rec.scores = stratified_kfold_cv(features, labels, cfg.k, seed, cv);
    rec.ttest = one_sample_t(rec.scores, mu);
  });

  if (!out.tests.empty()) {
    out.correction = bh(out.pvalues(), cfg.alpha);
    for (std::size_t i = 0; i < out.tests.size(); ++i) out.tests[i].significant = out.correction.rejected[i];
  } else {
    out.correction.procedure = "bh";
    out.correction.alpha = cfg.alpha;
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

}  // namespace

StepResult step1_channels(const TFRTensor& tensor, const PipelineConfig& cfg) {
  const auto& s = tensor.shape();
  const DctBasis freq_basis(s.freqs);
  const DctBasis time_basis(s.times);
  const ZonalMask mask{cfg.u, cfg.v};
  std::vector<VariableIndex> where;
  for (std::size_t c = 0; c < s.channels; ++c) where.push_back({c, 0, 0});
  return run_step(1, tensor, cfg, where, cfg.u * cfg.v,
                  [&](std::size_t r, const VariableIndex& w, std::span<double> out) {
                    dct2_zonal(tensor.slab(r, w.channel), freq_basis, time_basis, mask, out);
                  });
}

StepResult step2_frequencies(const TFRTensor& tensor, const std::vector<std::size_t>& sc,
                             const PipelineConfig& cfg) {
  const auto& s = tensor.shape();
  std::vector<VariableIndex> where;
  for (const std::size_t c : sc) {
    if (c >= s.channels) throw std::out_of_range("channel index out of range in SC");
    for (std::size_t f = 0; f < s.freqs; ++f) where.push_back({c, f, 0});
  }
  if (where.empty()) return run_step(2, tensor, cfg, where, cfg.u, [](auto, auto, auto) {});
  const DctBasis time_basis(s.times);
  return run_step(2, tensor, cfg, where, cfg.u,
                  [&](std::size_t r, const VariableIndex& w, std::span<double> out) {
                    const auto row = tensor.slab(r, w.channel).subspan(w.freq * s.times, s.times);
                    dct1_zonal(row, time_basis, cfg.u, out);
                  });
}

StepResult step3_timebins(const TFRTensor& tensor, const std::vector<ChannelFreq>& scf,
                          const PipelineConfig& cfg) {
  const auto& s = tensor.shape();
  std::vector<VariableIndex> where;
  for (const auto& [c, f] : scf) {
    if (c >= s.channels || f >= s.freqs) throw std::out_of_range("(channel, freq) out of range in SCF");
    for (std::size_t j = 0; j < s.times; ++j) where.push_back({c, f, j});
  }
  return run_step(3, tensor, cfg, where, 1, [&](std::size_t r, const VariableIndex& w, std::span<double> out) {
    out[0] = tensor.at(r, w.channel, w.freq, w.time);
  });
}

PipelineReport run_pipeline(const TFRTensor& tensor, const PipelineConfig& cfg) {
  PipelineReport report;
  report.config = cfg;
  report.warnings = check_pipeline_config(cfg, tensor);

  report.steps.push_back(step1_channels(tensor, cfg));
  for (const auto& t : report.steps.back().tests) {
    if (t.significant) report.sets.sc.push_back(t.where.channel);
  }
  if (report.sets.sc.empty()) {
    report.stop_stage = StopStage::kChannels;
    return report;
  }

  report.steps.push_back(step2_frequencies(tensor, report.sets.sc, cfg));
  for (const auto& t : report.steps.back().tests) {
    if (t.significant) report.sets.scf.emplace_back(t.where.channel, t.where.freq);
  }
  if (report.sets.scf.empty()) {
    report.stop_stage = StopStage::kFrequencies;
    return report;
  }

  report.steps.push_back(step3_timebins(tensor, report.sets.scf, cfg));
  for (const auto& t : report.steps.back().tests) {
    if (t.significant) report.sets.scft.push_back(t.where);
  }
  report.stop_stage = report.sets.scft.empty() ? StopStage::kTimes : StopStage::kCompleted;
  return report;
}

}  // namespace masstest
