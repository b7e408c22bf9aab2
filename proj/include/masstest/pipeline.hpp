#pragma once

#include "masstest/classify.hpp"
#include "masstest/core_data.hpp"
#include "masstest/mcp.hpp"
#include "masstest/stats.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace masstest {

struct PipelineConfig {
  double alpha{0.05};  // BH level in every step
  std::size_t k{15};   // folds
  std::size_t u{5};    // DCT rows kept (frequency direction in step 1, time in step 2)
  std::size_t v{5};    // DCT columns kept in step 1 (time direction)
  Metric metric{Metric::kAccuracy};
  // Chance level of the metric. Defaults to 0.5 for accuracy; must be given
  // for F1, whose chance level depends on the class balance.
  std::optional<double> mu;
  std::uint64_t seed{0};
  double l2{1.0};
  int threads{1};
};

// Throws std::invalid_argument for unusable settings; returns advisory
// warnings (trial count, fold size, k and DCT mask ranges) otherwise.
std::vector<std::string> check_pipeline_config(const PipelineConfig& cfg, const TFRTensor& tensor);

// Chance level in effect for cfg (throws when F1 is used without mu).
double chance_level(const PipelineConfig& cfg);

// One cross-validated test. Unused coordinates are 0 (freq/time in step 1,
// time in step 2).
struct TestRecord {
  VariableIndex where;
  FoldAccuracies scores;
  TTestResult ttest;
  bool significant{false};
};

struct StepResult {
  int step{1};
  std::vector<TestRecord> tests;
  RejectionResult correction;  // BH over the whole step family
  double seconds{0.0};         // wall time, reporting only

  PValueVector pvalues() const;
};

using ChannelFreq = std::pair<std::size_t, std::size_t>;

struct SignificanceSets {
  std::vector<std::size_t> sc;          // channels
  std::vector<ChannelFreq> scf;         // (channel, freq)
  std::vector<VariableIndex> scft;      // (channel, freq, time)

  // Every SCF pair has its channel in SC and every SCFT triple its pair in SCF.
  bool nested() const;
};

enum class StopStage {
  kChannels = 1,     // no significant channel
  kFrequencies = 2,  // no significant (channel, freq)
  kTimes = 3,        // no significant triple
  kCompleted = 4,    // SCFT non-empty
};

int stop_stage_code(StopStage s);

struct PipelineReport {
  SignificanceSets sets;
  std::vector<StepResult> steps;  // executed steps only
  StopStage stop_stage{StopStage::kChannels};
  std::vector<std::string> warnings;
  PipelineConfig config;

  // Tests executed in step 1..3 (0 for skipped steps).
  std::size_t tests_run(int step) const;
};

// Step 1: per channel, zonal 2-D DCT features of the freqs x times block.
StepResult step1_channels(const TFRTensor& tensor, const PipelineConfig& cfg);
// Step 2: per (channel in SC, freq), the first u 1-D DCT coefficients of the
// time course.
StepResult step2_frequencies(const TFRTensor& tensor, const std::vector<std::size_t>& sc,
                             const PipelineConfig& cfg);
// Step 3: per ((channel, freq) in SCF, time), the power value itself.
StepResult step3_timebins(const TFRTensor& tensor, const std::vector<ChannelFreq>& scf,
                          const PipelineConfig& cfg);

// Steps 1 -> 2 -> 3, stopping at the first empty set.
PipelineReport run_pipeline(const TFRTensor& tensor, const PipelineConfig& cfg);

}  // namespace masstest
