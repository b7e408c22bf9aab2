#pragma once

#include "masstest/cluster.hpp"
#include "masstest/core_data.hpp"
#include "masstest/mcp.hpp"
#include "masstest/pipeline.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace masstest {

// Ground-truth effect: an additive power shift for condition-1 trials.
struct EffectSpec {
  std::vector<VariableIndex> members;  // sorted, unique
  double amplitude{0.0};
  std::string shape{"broad"};  // "broad" | "narrow", descriptive only
};

// Block effect over the cartesian product of channels x [f0, f1) x [t0, t1).
EffectSpec block_effect(const std::vector<std::size_t>& channels, std::size_t f0, std::size_t f1, std::size_t t0,
                        std::size_t t1, double amplitude);
EffectSpec single_variable_effect(const VariableIndex& where, double amplitude);

struct SimConfig {
  std::size_t channels{10};
  std::size_t freqs{12};
  std::size_t times{20};
  std::size_t trials_per_condition{75};
  double noise_sigma{1.0};
  // Gaussian smoothing sigma over the freq-time grid, in cells (0 = none).
  double smoothing{2.0};
  // Share of variance carried by the low-rank spatial factor.
  double channel_correlation{0.5};
  std::size_t spatial_rank{2};
  std::size_t layout_columns{5};
};

// Channels on a regular grid with unit spacing, named C01, C02, ...
SensorLayout grid_layout(std::size_t channels, std::size_t columns);

// Baseline power is noise_sigma * |g| smoothed over the freq-time grid, where
// g mixes channel-specific and shared spatial Gaussian fields with unit
// variance. Condition-1 trials get +amplitude at the effect members (result
// clamped at 0). Labels are "y1"/"y2", balanced. Deterministic per seed.
// Throws std::invalid_argument on bad dimensions or an out-of-bounds effect.
TFRTensor gen_dataset(const SimConfig& cfg, const std::optional<EffectSpec>& effect, std::uint64_t seed);

// Mean within-condition standard deviation of one baseline variable,
// estimated from `datasets` null datasets.
double estimate_baseline_sd(const SimConfig& cfg, std::uint64_t seed, std::size_t datasets = 4);

// Mean shift giving Bayes accuracy `accuracy` between two equal-variance
// Gaussians with standard deviation `sd`: 2 * sd * Phi^-1(accuracy).
double amplitude_for_accuracy(double accuracy, double sd);

struct EvalMetrics {
  std::size_t detected{0};
  std::size_t true_detections{0};
  std::size_t false_detections{0};
  double sensitivity{0.0};                // |detected & truth| / |truth|
  double false_discovery_proportion{0.0};  // |detected \ truth| / max(1, |detected|)
  bool any_false_discovery{false};
  bool effect_detected{false};  // at least one truth member detected
};

// `truth` may be null-sized (no effect): sensitivity is then 0.
EvalMetrics evaluate(const std::vector<VariableIndex>& detected, const std::vector<VariableIndex>& truth);
EvalMetrics evaluate(const SignificanceSets& sets, const EffectSpec& truth);
EvalMetrics evaluate(const ClusterTestResult& result, const EffectSpec& truth);

struct PermutationValidity {
  // Index s - 1 counts runs with stop stage s (1..4, 4 = findings).
  std::array<std::size_t, 4> stop_histogram{};
  std::size_t total_significant{0};  // sum of |SCFT| over permutations
  std::vector<int> stop_stages;      // per permutation
  std::vector<std::size_t> scft_sizes;
};

// Runs the pipeline on `n_perm` label permutations of `tensor`. Permutation i
// shuffles with derive_seed(seed, {i}); with `include_identity` the first run
// uses the original labels. Pipeline seeds are cfg.seed for every run.
PermutationValidity permutation_validity(const TFRTensor& tensor, const PipelineConfig& cfg, std::size_t n_perm,
                                         std::uint64_t seed, bool include_identity = false);

enum class Procedure { kPipeline, kCluster, kBh, kTmax, kKtms };

std::string to_string(Procedure p);
Procedure procedure_from_string(const std::string& name);

struct Scenario {
  std::string name;
  std::optional<EffectSpec> effect;  // nullopt = null scenario
};

// null; narrow: one central variable at accuracy 0.8; broad: a 2 x 2
// neighbourhood of channels x 10 freqs x 10 times at accuracy 0.75.
std::vector<Scenario> default_scenarios(const SimConfig& sim, std::uint64_t seed);

struct CompareConfig {
  SimConfig sim;
  PipelineConfig pipeline;
  ClusterTestConfig cluster;
  PermutationScheme permutation;  // tmax / ktms
  double alpha{0.05};             // BH on mass-univariate t and tmax/ktms level
  std::size_t ktms_u{1};
  int threads{1};
};

struct CompareRow {
  std::string scenario;
  Procedure procedure{Procedure::kPipeline};
  std::size_t runs{0};
  double sensitivity{0.0}, sensitivity_se{0.0};
  double any_fd_rate{0.0}, any_fd_se{0.0};     // FWER estimate
  double fdr{0.0}, fdr_se{0.0};                // mean FDP
  double detection_rate{0.0}, detection_se{0.0};
  double exceed_u_rate{0.0};  // P(false discoveries > u); u = 0 except KTMS
};

struct CompareTable {
  std::vector<CompareRow> rows;
  std::string to_csv() const;
};

// Variables each procedure declares significant on one dataset.
std::vector<VariableIndex> detect(Procedure p, const TFRTensor& tensor, const CompareConfig& cfg,
                                  std::uint64_t seed);

// Paired simulation: replicate i of scenario s uses one dataset seeded by
// derive_seed(seed, {s, i}) for every procedure.
CompareTable compare_procedures(const std::vector<Scenario>& scenarios, const std::vector<Procedure>& procedures,
                                std::size_t n_sims, std::uint64_t seed, const CompareConfig& cfg);

}  // namespace masstest
