#include "masstest/cluster.hpp"

#include "masstest/error.hpp"
#include "masstest/parallel.hpp"
#include "masstest/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace masstest {

bool AdjacencyGraph::adjacent(std::size_t a, std::size_t b) const {
  const auto& n = neighbors.at(a);
  return std::binary_search(n.begin(), n.end(), b);
}

void AdjacencyGraph::validate() const {
  for (std::size_t a = 0; a < neighbors.size(); ++a) {
    for (const std::size_t b : neighbors[a]) {
      if (b >= neighbors.size()) throw std::invalid_argument("adjacency index out of range");
      if (b == a) throw std::invalid_argument("adjacency must be irreflexive");
      if (!adjacent(b, a)) throw std::invalid_argument("adjacency must be symmetric");
    }
  }
}

AdjacencyGraph build_adjacency(const SensorLayout& layout, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("adjacency radius must be positive");
  layout.validate();
  const std::size_t n = layout.positions.size();
  AdjacencyGraph g;
  g.neighbors.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double dx = layout.positions[i].x - layout.positions[j].x;
      const double dy = layout.positions[i].y - layout.positions[j].y;
      if (std::hypot(dx, dy) <= radius) g.neighbors[i].push_back(j);
    }
  }
  return g;
}

double default_adjacency_radius(const SensorLayout& layout) {
  layout.validate();
  const std::size_t n = layout.positions.size();
  if (n < 2) return 1.0;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      nearest[i] = std::min(nearest[i], std::hypot(layout.positions[i].x - layout.positions[j].x,
                                                   layout.positions[i].y - layout.positions[j].y));
    }
  }
  std::sort(nearest.begin(), nearest.end());
  const double median = n % 2 == 1 ? nearest[n / 2] : 0.5 * (nearest[n / 2 - 1] + nearest[n / 2]);
  return median > 0.0 ? 1.3 * median : 1.0;
}

SensorLayout layout_for_channels(const SensorLayout& layout, const std::vector<std::string>& channels) {
  SensorLayout out;
  out.channel_names = channels;
  for (const auto& name : channels) {
    const auto pos = layout.position_of(name);
    if (!pos) throw DataError("layout has no position for channel '" + name + "'");
    out.positions.push_back(*pos);
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// Cluster search

namespace {

// Reusable buffers for the flood fill; one per worker.
class ClusterScanner {
 public:
  ClusterScanner(const GridShape& shape, const AdjacencyGraph& adjacency, std::size_t min_neighbors)
      : shape_(shape), adjacency_(adjacency), min_neighbors_(min_neighbors) {
    if (adjacency.size() != shape.channels) {
      throw std::invalid_argument("adjacency covers " + std::to_string(adjacency.size()) + " channels, data has " +
                                  std::to_string(shape.channels));
    }
    sign_.resize(shape.size());
    label_.resize(shape.size());
  }

  // Labels components; returns their count. Component masses in masses_.
  std::size_t scan(std::span<const double> t, double threshold) {
    if (!(threshold > 0.0)) throw std::invalid_argument("cluster threshold must be positive");
    if (t.size() != shape_.size()) throw std::invalid_argument("statistic array does not match the grid");
    const std::size_t plane = shape_.freqs * shape_.times;
    for (std::size_t v = 0; v < t.size(); ++v) sign_[v] = t[v] > threshold ? 1 : (t[v] < -threshold ? -1 : 0);

    // Spatial pruning on the unpruned supra-threshold map.
    std::fill(label_.begin(), label_.end(), kUnset);
    for (std::size_t v = 0; v < t.size(); ++v) {
      if (sign_[v] == 0) {
        label_[v] = kIgnored;
        continue;
      }
      if (min_neighbors_ == 0) continue;
      const std::size_t c = v / plane;
      const std::size_t offset = v % plane;
      std::size_t count = 0;
      for (const std::size_t nc : adjacency_.neighbors[c]) {
        if (sign_[nc * plane + offset] == sign_[v] && ++count >= min_neighbors_) break;
      }
      if (count < min_neighbors_) label_[v] = kIgnored;
    }

    masses_.clear();
    signs_.clear();
    std::size_t next = 0;
    for (std::size_t seed = 0; seed < t.size(); ++seed) {
      if (label_[seed] != kUnset) continue;
      const int s = sign_[seed];
      double mass = 0.0;
      stack_.clear();
      stack_.push_back(seed);
      label_[seed] = next;
      while (!stack_.empty()) {
        const std::size_t v = stack_.back();
        stack_.pop_back();
        mass += t[v];
        const std::size_t c = v / plane;
        const std::size_t offset = v % plane;
        const std::size_t f = offset / shape_.times;
        const std::size_t j = offset % shape_.times;
        auto visit = [&](std::size_t w) {
          if (label_[w] == kUnset && sign_[w] == s) {
            label_[w] = next;
            stack_.push_back(w);
          }
        };
        if (f > 0) visit(v - shape_.times);
        if (f + 1 < shape_.freqs) visit(v + shape_.times);
        if (j > 0) visit(v - 1);
        if (j + 1 < shape_.times) visit(v + 1);
        for (const std::size_t nc : adjacency_.neighbors[c]) visit(nc * plane + offset);
      }
      masses_.push_back(mass);
      signs_.push_back(s);
      ++next;
    }
    return next;
  }

  const std::vector<double>& masses() const { return masses_; }
  const std::vector<int>& signs() const { return signs_; }
  const std::vector<std::size_t>& labels() const { return label_; }

  static constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  static constexpr std::size_t kIgnored = std::numeric_limits<std::size_t>::max() - 1;

 private:
  GridShape shape_;
  const AdjacencyGraph& adjacency_;
  std::size_t min_neighbors_;
  std::vector<int> sign_;
  std::vector<std::size_t> label_;
  std::vector<std::size_t> stack_;
  std::vector<double> masses_;
  std::vector<int> signs_;
};

std::vector<Cluster> collect_clusters(const ClusterScanner& scanner, std::size_t count, const GridShape& shape) {
  std::vector<Cluster> clusters(count);
  for (std::size_t k = 0; k < count; ++k) {
    clusters[k].mass = scanner.masses()[k];
    clusters[k].sign = scanner.signs()[k];
  }
  const TfrShape tshape{1, shape.channels, shape.freqs, shape.times};
  const auto& labels = scanner.labels();
  for (std::size_t v = 0; v < labels.size(); ++v) {
    if (labels[v] < count) clusters[labels[v]].members.push_back(variable_at(tshape, v));
  }
  return clusters;
}

}  // namespace

std::vector<Cluster> find_clusters(std::span<const double> tstats, const GridShape& shape, double threshold,
                                   const AdjacencyGraph& adjacency, std::size_t min_neighbors) {
  ClusterScanner scanner(shape, adjacency, min_neighbors);
  const std::size_t count = scanner.scan(tstats, threshold);
  return collect_clusters(scanner, count, shape);
}

std::vector<VariableIndex> ClusterTestResult::significant_variables() const {
  std::vector<VariableIndex> out;
  for (const auto& c : clusters) {
    if (c.significant) out.insert(out.end(), c.members.begin(), c.members.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ClusterTestResult cluster_permutation_test(const TFRTensor& tensor, const SensorLayout& layout,
                                           const ClusterTestConfig& cfg) {
  if (!(cfg.sample_alpha > 0.0 && cfg.sample_alpha < 1.0) || !(cfg.test_alpha > 0.0 && cfg.test_alpha < 1.0)) {
    throw std::invalid_argument("cluster test alphas must lie in (0, 1)");
  }
  if (cfg.n_perm < 1) throw std::invalid_argument("n_perm must be at least 1");
  const auto& s = tensor.shape();
  const GridShape grid{s.channels, s.freqs, s.times};
  const SensorLayout ordered = layout_for_channels(layout, tensor.channel_names());
  const double radius = cfg.radius.value_or(default_adjacency_radius(ordered));
  const AdjacencyGraph adjacency = build_adjacency(ordered, radius);

  const DataMatrix data = as_matrix(tensor);
  const MassTStatistic mass(data);
  const std::size_t na = mass.observed_group().size();
  if (na < 2 || s.trials - na < 2) throw std::invalid_argument("each condition needs at least 2 trials");

  ClusterTestResult out;
  out.threshold = t_critical(cfg.sample_alpha / 2.0, static_cast<double>(s.trials) - 2.0);
  out.observed_t.resize(grid.size());
  mass.observed(out.observed_t);
  {
    ClusterScanner scanner(grid, adjacency, cfg.min_neighbors);
    out.clusters = collect_clusters(scanner, scanner.scan(out.observed_t, out.threshold), grid);
  }

  PermutationScheme scheme;
  scheme.n_perm = cfg.n_perm;
  scheme.seed = cfg.seed;
  const RelabelGenerator gen(s.trials, na, scheme);
  out.null_max_positive.assign(cfg.n_perm, 0.0);
  out.null_min_negative.assign(cfg.n_perm, 0.0);

  constexpr std::size_t kBlock = 8;
  const std::size_t blocks = (cfg.n_perm + kBlock - 1) / kBlock;
  parallel_for(blocks, cfg.threads, [&](std::size_t b) {
    ClusterScanner scanner(grid, adjacency, cfg.min_neighbors);
    std::vector<std::size_t> group;
    std::vector<double> t(grid.size()), sum, sq;
    const std::size_t end = std::min(cfg.n_perm, (b + 1) * kBlock);
    for (std::size_t i = b * kBlock; i < end; ++i) {
      gen.draw(i, group);
      mass.compute(group, t, sum, sq);
      const std::size_t count = scanner.scan(t, out.threshold);
      double hi = 0.0;
      double lo = 0.0;
      for (std::size_t k = 0; k < count; ++k) {
        hi = std::max(hi, scanner.masses()[k]);
        lo = std::min(lo, scanner.masses()[k]);
      }
      out.null_max_positive[i] = hi;
      out.null_min_negative[i] = lo;
    }
  });

  constexpr double kTieSlack = 1e-12;
  out.p.assign(grid.size(), 1.0);
  const TfrShape tshape{1, s.channels, s.freqs, s.times};
  for (auto& c : out.clusters) {
    std::size_t hits = 0;
    if (c.sign > 0) {
      const double bar = c.mass * (1.0 - kTieSlack);
      for (const double m : out.null_max_positive) hits += m >= bar ? 1 : 0;
    } else {
      const double bar = c.mass * (1.0 - kTieSlack);
      for (const double m : out.null_min_negative) hits += m <= bar ? 1 : 0;
    }
    c.p = static_cast<double>(hits + 1) / static_cast<double>(cfg.n_perm + 1);
    c.significant = c.p <= cfg.test_alpha;
    for (const auto& v : c.members) out.p[flat_index(tshape, v)] = c.p;
  }
  return out;
}

}  // namespace masstest
