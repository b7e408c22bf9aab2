#pragma once

#include "masstest/core_data.hpp"
#include "masstest/mcp.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace masstest {

// Spatial neighbourhood between channels; symmetric and irreflexive.
struct AdjacencyGraph {
  std::vector<std::vector<std::size_t>> neighbors;  // sorted per channel

  std::size_t size() const { return neighbors.size(); }
  bool adjacent(std::size_t a, std::size_t b) const;
  // Throws std::invalid_argument when asymmetric, reflexive or out of range.
  void validate() const;
};

// Channels i != j are neighbours iff their layout distance is <= radius.
AdjacencyGraph build_adjacency(const SensorLayout& layout, double radius);

// 1.3 times the median nearest-neighbour distance of the layout.
double default_adjacency_radius(const SensorLayout& layout);

// Reorders the layout to the tensor's channel order (by name). Throws
// DataError when a channel has no position.
SensorLayout layout_for_channels(const SensorLayout& layout, const std::vector<std::string>& channels);

struct GridShape {
  std::size_t channels{0};
  std::size_t freqs{0};
  std::size_t times{0};
  std::size_t size() const { return channels * freqs * times; }
};

struct Cluster {
  std::vector<VariableIndex> members;  // sorted
  double mass{0.0};                    // sum of member t
  int sign{1};                         // +1 positive, -1 negative
  double p{1.0};
  bool significant{false};
};

// Supra-threshold variables (t > threshold, and separately t < -threshold)
// grouped into connected components. Before grouping, a variable is dropped
// unless at least `min_neighbors` neighbouring channels are supra-threshold
// with the same sign at the same (freq, time). Connectivity: same channel with
// a unit step in freq or time, or neighbouring channels at the same
// (freq, time). Clusters are ordered by their first member.
std::vector<Cluster> find_clusters(std::span<const double> tstats, const GridShape& shape, double threshold,
                                   const AdjacencyGraph& adjacency, std::size_t min_neighbors);

struct ClusterTestConfig {
  double sample_alpha{0.05};  // two-tailed per-variable threshold level
  double test_alpha{0.025};   // cluster-level alpha per tail
  std::size_t min_neighbors{2};
  std::size_t n_perm{500};
  std::uint64_t seed{0};
  std::optional<double> radius;  // default_adjacency_radius when unset
  int threads{1};
};

struct ClusterTestResult {
  std::vector<double> observed_t;  // per variable
  double threshold{0.0};           // critical |t|
  std::vector<Cluster> clusters;   // observed, with p
  PValueVector p;                  // per variable; 1 outside clusters
  std::vector<double> null_max_positive;  // per permutation, 0 if none
  std::vector<double> null_min_negative;  // per permutation, 0 if none

  // Members of significant clusters.
  std::vector<VariableIndex> significant_variables() const;
};

// Cluster-mass permutation test. Throws std::invalid_argument for fewer than
// two trials per condition or invalid alphas.
ClusterTestResult cluster_permutation_test(const TFRTensor& tensor, const SensorLayout& layout,
                                           const ClusterTestConfig& cfg);

}  // namespace masstest
