#include "masstest/pipeline.hpp"

#include "helpers.hpp"
#include "masstest/parallel.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace masstest;

namespace {

// Channels 1 and 3, freqs 2..4, times 3..7 carry the effect.
bool effect_cell(std::size_t c, std::size_t f, std::size_t t) {
  return (c == 1 || c == 3) && f >= 2 && f <= 4 && t >= 3 && t <= 7;
}

TFRTensor effect_tensor(std::uint64_t seed, double shift = 1.2) {
  return testutil::random_tensor({120, 5, 8, 10}, seed, shift, effect_cell);
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.k = 6;
  cfg.u = 3;
  cfg.v = 3;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST(PipelineConfig, ErrorsAndWarnings) {
  const auto t = testutil::random_tensor({40, 2, 6, 6}, 1);
  PipelineConfig cfg;
  cfg.k = 5;
  cfg.u = 3;
  cfg.v = 3;
  const auto w = check_pipeline_config(cfg, t);
  // 40 trials, k outside 15..25, folds of 8 trials.
  EXPECT_EQ(w.size(), 3u);

  auto bad = cfg;
  bad.k = 11;  // 2k = 22 > 20 per class
  EXPECT_THROW(check_pipeline_config(bad, t), std::invalid_argument);
  bad = cfg;
  bad.u = 7;
  EXPECT_THROW(check_pipeline_config(bad, t), std::invalid_argument);
  bad = cfg;
  bad.alpha = 1.0;
  EXPECT_THROW(check_pipeline_config(bad, t), std::invalid_argument);
  bad = cfg;
  bad.metric = Metric::kF1;
  EXPECT_THROW(check_pipeline_config(bad, t), std::invalid_argument);
  bad.mu = 0.5;
  EXPECT_NO_THROW(check_pipeline_config(bad, t));
  EXPECT_DOUBLE_EQ(chance_level(cfg), 0.5);
}

TEST(Pipeline, Step1MatchesDirectComposition) {
  const auto t = effect_tensor(3);
  const auto cfg = small_config();
  const auto step = step1_channels(t, cfg);
  ASSERT_EQ(step.tests.size(), 5u);
  const auto& s = t.shape();
  for (std::size_t c = 0; c < s.channels; ++c) {
    FeatureMatrix f(s.trials, cfg.u * cfg.v);
    for (std::size_t r = 0; r < s.trials; ++r) {
      const auto slab = t.slab(r, c);
      const auto full = oracle::dct2_sum(std::vector<double>(slab.begin(), slab.end()), s.freqs, s.times);
      for (std::size_t p = 0; p < cfg.u; ++p) {
        for (std::size_t q = 0; q < cfg.v; ++q) f(r, p * cfg.v + q) = full[p * s.times + q];
      }
    }
    const auto scores = stratified_kfold_cv(f, t.labels().codes(), cfg.k, derive_seed(cfg.seed, {1, c, 0, 0}));
    ASSERT_EQ(step.tests[c].scores.values.size(), cfg.k);
    for (std::size_t i = 0; i < cfg.k; ++i) EXPECT_NEAR(step.tests[c].scores.values[i], scores.values[i], 1e-12);
    const auto tt = one_sample_t(scores, 0.5);
    EXPECT_NEAR(step.tests[c].ttest.p, tt.p, 1e-12);
  }
  const auto expected = oracle::bh(step.pvalues(), cfg.alpha);
  for (std::size_t c = 0; c < s.channels; ++c) EXPECT_EQ(step.tests[c].significant, expected[c]);
}

TEST(Pipeline, FindsEffectWithNestedSets) {
  const auto t = effect_tensor(4);
  const auto report = run_pipeline(t, small_config());
  EXPECT_EQ(report.stop_stage, StopStage::kCompleted);
  EXPECT_TRUE(report.sets.nested());
  EXPECT_EQ(report.sets.sc, (std::vector<std::size_t>{1, 3}));
  EXPECT_EQ(report.tests_run(1), 5u);
  EXPECT_EQ(report.tests_run(2), report.sets.sc.size() * 8);
  EXPECT_EQ(report.tests_run(3), report.sets.scf.size() * 10);
  std::size_t true_hits = 0;
  for (const auto& v : report.sets.scft) true_hits += effect_cell(v.channel, v.freq, v.time) ? 1 : 0;
  EXPECT_GE(true_hits, 20u);
  EXPECT_GE(double(true_hits) / double(report.sets.scft.size()), 0.8);
}

TEST(Pipeline, EarlyStopOnNull) {
  // Labels unrelated to power; step 1 should normally find nothing.
  std::size_t stopped_at_one = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto t = testutil::random_tensor({120, 5, 8, 10}, 100 + seed);
    const auto report = run_pipeline(t, small_config());
    EXPECT_TRUE(report.sets.nested());
    EXPECT_EQ(report.steps.size(), std::size_t(stop_stage_code(report.stop_stage) == 4 ? 3 : stop_stage_code(report.stop_stage)));
    if (report.stop_stage == StopStage::kChannels) {
      ++stopped_at_one;
      EXPECT_EQ(report.tests_run(2), 0u);
      EXPECT_TRUE(report.sets.sc.empty());
    }
  }
  EXPECT_GE(stopped_at_one, 2u);
}

TEST(Pipeline, DeterministicAcrossThreads) {
  const auto t = effect_tensor(5);
  auto cfg = small_config();
  cfg.threads = 1;
  const auto a = run_pipeline(t, cfg);
  cfg.threads = 4;
  const auto b = run_pipeline(t, cfg);
  ASSERT_EQ(a.steps.size(), b.steps.size());
  for (std::size_t s = 0; s < a.steps.size(); ++s) {
    ASSERT_EQ(a.steps[s].tests.size(), b.steps[s].tests.size());
    for (std::size_t i = 0; i < a.steps[s].tests.size(); ++i) {
      EXPECT_EQ(a.steps[s].tests[i].scores.values, b.steps[s].tests[i].scores.values);
      EXPECT_EQ(a.steps[s].tests[i].ttest.p, b.steps[s].tests[i].ttest.p);
    }
  }
  EXPECT_EQ(a.sets.scft, b.sets.scft);
  cfg.seed = 43;
  const auto c = run_pipeline(t, cfg);
  EXPECT_NE(a.steps[0].tests[0].scores.values, c.steps[0].tests[0].scores.values);
}

TEST(Pipeline, StepInputsOutOfRange) {
  const auto t = effect_tensor(6);
  const auto cfg = small_config();
  EXPECT_THROW(step2_frequencies(t, {7}, cfg), std::out_of_range);
  EXPECT_THROW(step3_timebins(t, {{0, 9}}, cfg), std::out_of_range);
  EXPECT_TRUE(step2_frequencies(t, {}, cfg).tests.empty());
}

TEST(SignificanceSets, Nesting) {
  SignificanceSets s;
  s.sc = {0, 2};
  s.scf = {{0, 1}, {2, 3}};
  s.scft = {{0, 1, 4}};
  EXPECT_TRUE(s.nested());
  s.scft.push_back({2, 1, 0});
  EXPECT_FALSE(s.nested());
  s.scft.pop_back();
  s.scf.push_back({1, 0});
  EXPECT_FALSE(s.nested());
}
