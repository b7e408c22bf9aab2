#include "masstest/simulate.hpp"

#include "masstest/parallel.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace masstest {

EffectSpec block_effect(const std::vector<std::size_t>& channels, std::size_t f0, std::size_t f1, std::size_t t0,
                        std::size_t t1, double amplitude) {
  EffectSpec e;
  e.amplitude = amplitude;
  for (const std::size_t c : channels) {
    for (std::size_t f = f0; f < f1; ++f) {
      for (std::size_t t = t0; t < t1; ++t) e.members.push_back({c, f, t});
    }
  }
  std::sort(e.members.begin(), e.members.end());
  e.members.erase(std::unique(e.members.begin(), e.members.end()), e.members.end());
  e.shape = e.members.size() > 1 ? "broad" : "narrow";
  return e;
}

EffectSpec single_variable_effect(const VariableIndex& where, double amplitude) {
  return {{where}, amplitude, "narrow"};
}

SensorLayout grid_layout(std::size_t channels, std::size_t columns) {
  if (columns == 0) throw std::invalid_argument("layout needs at least one column");
  SensorLayout layout;
  for (std::size_t c = 0; c < channels; ++c) {
    std::ostringstream name;
    name << 'C' << std::setw(2) << std::setfill('0') << (c + 1);
    layout.channel_names.push_back(name.str());
    layout.positions.push_back({static_cast<double>(c % columns), static_cast<double>(c / columns)});
  }
  return layout;
}

namespace {

std::vector<double> gaussian_taps(double sigma) {
  if (sigma <= 0.0) return {1.0};
  const auto half = static_cast<std::size_t>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * half + 1);
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const double d = static_cast<double>(i) - static_cast<double>(half);
    taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
  }
  return taps;
}

// In-place separable smoothing of a rows x cols block; weights renormalised at
// the edges so every output is a convex combination.
void smooth_block(std::span<double> block, std::size_t rows, std::size_t cols, const std::vector<double>& taps,
                  std::vector<double>& tmp) {
  const std::size_t half = taps.size() / 2;
  if (half == 0) return;
  tmp.assign(block.size(), 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0, wsum = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) {
        const auto jj = static_cast<std::ptrdiff_t>(j + k) - static_cast<std::ptrdiff_t>(half);
        if (jj < 0 || jj >= static_cast<std::ptrdiff_t>(cols)) continue;
        acc += taps[k] * block[i * cols + static_cast<std::size_t>(jj)];
        wsum += taps[k];
      }
      tmp[i * cols + j] = acc / wsum;
    }
  }
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      double acc = 0.0, wsum = 0.0;
      for (std::size_t k = 0; k < taps.size(); ++k) {
        const auto ii = static_cast<std::ptrdiff_t>(i + k) - static_cast<std::ptrdiff_t>(half);
        if (ii < 0 || ii >= static_cast<std::ptrdiff_t>(rows)) continue;
        acc += taps[k] * tmp[static_cast<std::size_t>(ii) * cols + j];
        wsum += taps[k];
      }
      block[i * cols + j] = acc / wsum;
    }
  }
}

// Loadings of each channel on the shared spatial factors: Gaussian bumps
// centred at anchors spread along the layout's x extent, rows normalised.
std::vector<double> spatial_loadings(const SensorLayout& layout, std::size_t rank) {
  const std::size_t n = layout.positions.size();
  std::vector<double> loadings(n * rank, 0.0);
  if (rank == 0 || n == 0) return loadings;
  double xmin = layout.positions[0].x, xmax = xmin, ymin = layout.positions[0].y, ymax = ymin;
  for (const auto& p : layout.positions) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double width = std::max(1.0, xmax - xmin);
  const double ycenter = 0.5 * (ymin + ymax);
  const double spread = width / static_cast<double>(rank);
  for (std::size_t c = 0; c < n; ++c) {
    double norm = 0.0;
    for (std::size_t k = 0; k < rank; ++k) {
      const double ax = rank == 1 ? 0.5 * (xmin + xmax)
                                  : xmin + width * static_cast<double>(k) / static_cast<double>(rank - 1);
      const double dx = layout.positions[c].x - ax;
      const double dy = layout.positions[c].y - ycenter;
      const double w = std::exp(-(dx * dx + dy * dy) / (2.0 * spread * spread));
      loadings[c * rank + k] = w;
      norm += w * w;
    }
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < rank; ++k) loadings[c * rank + k] = norm > 0.0 ? loadings[c * rank + k] / norm : 0.0;
  }
  return loadings;
}

}  // namespace

TFRTensor gen_dataset(const SimConfig& cfg, const std::optional<EffectSpec>& effect, std::uint64_t seed) {
  if (cfg.channels == 0 || cfg.freqs == 0 || cfg.times == 0) throw std::invalid_argument("dimensions must be positive");
  if (cfg.trials_per_condition < 2) throw std::invalid_argument("need at least 2 trials per condition");
  if (!(cfg.noise_sigma > 0.0)) throw std::invalid_argument("noise_sigma must be positive");
  if (!(cfg.smoothing >= 0.0)) throw std::invalid_argument("smoothing must be non-negative");
  if (!(cfg.channel_correlation >= 0.0 && cfg.channel_correlation <= 1.0)) {
    throw std::invalid_argument("channel_correlation must lie in [0, 1]");
  }
  if (effect) {
    if (!std::isfinite(effect->amplitude)) throw std::invalid_argument("effect amplitude must be finite");
    for (const auto& v : effect->members) {
      if (v.channel >= cfg.channels || v.freq >= cfg.freqs || v.time >= cfg.times) {
        throw std::invalid_argument("effect member out of bounds");
      }
    }
  }

  const std::size_t trials = 2 * cfg.trials_per_condition;
  const TfrShape shape{trials, cfg.channels, cfg.freqs, cfg.times};
  const std::size_t plane = cfg.freqs * cfg.times;
  const SensorLayout layout = grid_layout(cfg.channels, cfg.layout_columns);
  const std::size_t rank = cfg.channel_correlation > 0.0 ? cfg.spatial_rank : 0;
  const auto loadings = spatial_loadings(layout, rank);
  const double own = std::sqrt(1.0 - (rank > 0 ? cfg.channel_correlation : 0.0));
  const double shared = std::sqrt(rank > 0 ? cfg.channel_correlation : 0.0);
  const auto taps = gaussian_taps(cfg.smoothing);

  std::vector<int> codes(trials);
  for (std::size_t r = 0; r < trials; ++r) codes[r] = r < cfg.trials_per_condition ? 0 : 1;

  std::vector<double> power(shape.size());
  std::vector<double> factors(rank * plane), tmp;
  for (std::size_t r = 0; r < trials; ++r) {
    std::mt19937_64 rng(derive_seed(seed, {r}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& f : factors) f = normal(rng);
    for (std::size_t c = 0; c < cfg.channels; ++c) {
      std::span<double> block(power.data() + (r * cfg.channels + c) * plane, plane);
      for (std::size_t i = 0; i < plane; ++i) {
        double g = own * normal(rng);
        for (std::size_t k = 0; k < rank; ++k) g += shared * loadings[c * rank + k] * factors[k * plane + i];
        block[i] = cfg.noise_sigma * std::abs(g);
      }
      smooth_block(block, cfg.freqs, cfg.times, taps, tmp);
    }
  }

  if (effect && effect->amplitude != 0.0) {
    for (std::size_t r = 0; r < trials; ++r) {
      if (codes[r] != 1) continue;
      for (const auto& v : effect->members) {
        double& x = power[r * shape.variables() + flat_index(shape, v)];
        x = std::max(0.0, x + effect->amplitude);
      }
    }
  }

  std::vector<double> freqs(cfg.freqs), times(cfg.times);
  for (std::size_t f = 0; f < cfg.freqs; ++f) freqs[f] = static_cast<double>(f + 1);
  for (std::size_t t = 0; t < cfg.times; ++t) times[t] = 0.05 * static_cast<double>(t);
  return TFRTensor(shape, std::move(power), std::move(freqs), std::move(times), layout.channel_names,
                   LabelVector::from_codes(std::move(codes), {"y1", "y2"}), layout);
}

double estimate_baseline_sd(const SimConfig& cfg, std::uint64_t seed, std::size_t datasets) {
  if (datasets == 0) throw std::invalid_argument("need at least one dataset");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t d = 0; d < datasets; ++d) {
    const TFRTensor t = gen_dataset(cfg, std::nullopt, derive_seed(seed, {0x5d, d}));
    const auto& s = t.shape();
    const std::size_t vars = s.variables();
    for (int cls = 0; cls < 2; ++cls) {
      std::vector<double> sum(vars, 0.0), sq(vars, 0.0);
      std::size_t n = 0;
      for (std::size_t r = 0; r < s.trials; ++r) {
        if (t.labels()[r] != cls) continue;
        ++n;
        const auto row = t.trial(r);
        for (std::size_t v = 0; v < vars; ++v) {
          sum[v] += row[v];
          sq[v] += row[v] * row[v];
        }
      }
      for (std::size_t v = 0; v < vars; ++v) {
        const double mean = sum[v] / static_cast<double>(n);
        const double var = (sq[v] - static_cast<double>(n) * mean * mean) / static_cast<double>(n - 1);
        total += std::sqrt(std::max(0.0, var));
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

double amplitude_for_accuracy(double accuracy, double sd) {
  if (!(accuracy > 0.5 && accuracy < 1.0)) throw std::invalid_argument("accuracy must lie in (0.5, 1)");
  const boost::math::normal standard;
  return 2.0 * sd * boost::math::quantile(standard, accuracy);
}

// ---------------------------------------------------------------------------
// Evaluation

EvalMetrics evaluate(const std::vector<VariableIndex>& detected, const std::vector<VariableIndex>& truth) {
  std::vector<VariableIndex> d = detected;
  std::vector<VariableIndex> t = truth;
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end()), d.end());
  std::sort(t.begin(), t.end());
  t.erase(std::unique(t.begin(), t.end()), t.end());

  std::vector<VariableIndex> hit;
  std::set_intersection(d.begin(), d.end(), t.begin(), t.end(), std::back_inserter(hit));
  EvalMetrics m;
  m.detected = d.size();
  m.true_detections = hit.size();
  m.false_detections = d.size() - hit.size();
  m.sensitivity = t.empty() ? 0.0 : static_cast<double>(hit.size()) / static_cast<double>(t.size());
  m.false_discovery_proportion =
      static_cast<double>(m.false_detections) / static_cast<double>(std::max<std::size_t>(1, d.size()));
  m.any_false_discovery = m.false_detections > 0;
  m.effect_detected = !hit.empty();
  return m;
}

EvalMetrics evaluate(const SignificanceSets& sets, const EffectSpec& truth) {
  return evaluate(sets.scft, truth.members);
}

EvalMetrics evaluate(const ClusterTestResult& result, const EffectSpec& truth) {
  return evaluate(result.significant_variables(), truth.members);
}

// ---------------------------------------------------------------------------
// Label-permutation validity

PermutationValidity permutation_validity(const TFRTensor& tensor, const PipelineConfig& cfg, std::size_t n_perm,
                                         std::uint64_t seed, bool include_identity) {
  if (n_perm < 1) throw std::invalid_argument("n_perm must be at least 1");
  PermutationValidity out;
  out.stop_stages.resize(n_perm);
  out.scft_sizes.resize(n_perm);
  PipelineConfig inner = cfg;
  inner.threads = 1;
  const std::size_t trials = tensor.shape().trials;
  parallel_for(n_perm, cfg.threads, [&](std::size_t i) {
    std::vector<std::size_t> order(trials);
    std::iota(order.begin(), order.end(), 0);
    if (!(include_identity && i == 0)) {
      std::mt19937_64 rng(derive_seed(seed, {i}));
      for (std::size_t k = trials; k > 1; --k) std::swap(order[k - 1], order[rng() % k]);
    }
    const TFRTensor relabelled = tensor.with_labels(tensor.labels().permuted(order));
    const PipelineReport report = run_pipeline(relabelled, inner);
    out.stop_stages[i] = stop_stage_code(report.stop_stage);
    out.scft_sizes[i] = report.sets.scft.size();
  });
  for (std::size_t i = 0; i < n_perm; ++i) {
    ++out.stop_histogram[static_cast<std::size_t>(out.stop_stages[i] - 1)];
    out.total_significant += out.scft_sizes[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Procedure comparison

std::string to_string(Procedure p) {
  switch (p) {
    case Procedure::kPipeline: return "pipeline";
    case Procedure::kCluster: return "cluster";
    case Procedure::kBh: return "bh";
    case Procedure::kTmax: return "tmax";
    case Procedure::kKtms: return "ktms";
  }
  return "unknown";
}

Procedure procedure_from_string(const std::string& name) {
  for (const auto p : {Procedure::kPipeline, Procedure::kCluster, Procedure::kBh, Procedure::kTmax, Procedure::kKtms}) {
    if (to_string(p) == name) return p;
  }
  throw std::invalid_argument("unknown procedure '" + name + "'");
}

std::vector<VariableIndex> detect(Procedure p, const TFRTensor& tensor, const CompareConfig& cfg, std::uint64_t seed) {
  const auto& shape = tensor.shape();
  std::vector<VariableIndex> out;
  auto from_mask = [&](const std::vector<bool>& mask) {
    for (std::size_t v = 0; v < mask.size(); ++v) {
      if (mask[v]) out.push_back(variable_at(shape, v));
    }
  };
  switch (p) {
    case Procedure::kPipeline: {
      PipelineConfig pc = cfg.pipeline;
      pc.seed = derive_seed(seed, {1});
      pc.threads = 1;
      out = run_pipeline(tensor, pc).sets.scft;
      break;
    }
    case Procedure::kCluster: {
      if (!tensor.layout()) throw std::invalid_argument("cluster test needs a sensor layout");
      ClusterTestConfig cc = cfg.cluster;
      cc.seed = derive_seed(seed, {2});
      cc.threads = 1;
      out = cluster_permutation_test(tensor, *tensor.layout(), cc).significant_variables();
      break;
    }
    case Procedure::kBh: {
      from_mask(bh(mass_t_pvalues(as_matrix(tensor)), cfg.alpha).rejected);
      break;
    }
    case Procedure::kTmax: {
      PermutationScheme ps = cfg.permutation;
      ps.seed = derive_seed(seed, {3});
      ps.threads = 1;
      const auto r = tmax_test(tensor, ps);
      std::vector<bool> mask(r.p.size());
      for (std::size_t v = 0; v < mask.size(); ++v) mask[v] = r.p[v] <= cfg.alpha;
      from_mask(mask);
      break;
    }
    case Procedure::kKtms: {
      PermutationScheme ps = cfg.permutation;
      ps.seed = derive_seed(seed, {4});
      ps.threads = 1;
      from_mask(ktms(tensor, cfg.ktms_u, cfg.alpha, ps).rejection.rejected);
      break;
    }
  }
  return out;
}

namespace {

struct Accumulator {
  std::size_t n{0};
  double sum{0.0}, sq{0.0};
  void add(double x) {
    ++n;
    sum += x;
    sq += x * x;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double se() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sq - static_cast<double>(n) * m * m) / static_cast<double>(n - 1));
    return std::sqrt(var / static_cast<double>(n));
  }
};

}  // namespace

CompareTable compare_procedures(const std::vector<Scenario>& scenarios, const std::vector<Procedure>& procedures,
                                std::size_t n_sims, std::uint64_t seed, const CompareConfig& cfg) {
  if (scenarios.empty() || procedures.empty()) throw std::invalid_argument("scenarios and procedures must be non-empty");
  if (n_sims < 1) throw std::invalid_argument("n_sims must be at least 1");
  const std::size_t np = procedures.size();
  CompareTable table;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    std::vector<EvalMetrics> metrics(n_sims * np);
    const auto& truth = scenarios[s].effect ? scenarios[s].effect->members : std::vector<VariableIndex>{};
    parallel_for(n_sims, cfg.threads, [&](std::size_t i) {
      const std::uint64_t sim_seed = derive_seed(seed, {s, i});
      const TFRTensor data = gen_dataset(cfg.sim, scenarios[s].effect, sim_seed);
      for (std::size_t k = 0; k < np; ++k) metrics[i * np + k] = evaluate(detect(procedures[k], data, cfg, sim_seed), truth);
    });
    for (std::size_t k = 0; k < np; ++k) {
      Accumulator sens, anyfd, fdp, det;
      std::size_t exceed = 0;
      const std::size_t u = procedures[k] == Procedure::kKtms ? cfg.ktms_u : 0;
      for (std::size_t i = 0; i < n_sims; ++i) {
        const auto& m = metrics[i * np + k];
        sens.add(m.sensitivity);
        anyfd.add(m.any_false_discovery ? 1.0 : 0.0);
        fdp.add(m.false_discovery_proportion);
        det.add(m.effect_detected ? 1.0 : 0.0);
        exceed += m.false_detections > u ? 1 : 0;
      }
      CompareRow row;
      row.scenario = scenarios[s].name;
      row.procedure = procedures[k];
      row.runs = sens.n;
      row.sensitivity = sens.mean();
      row.sensitivity_se = sens.se();
      row.any_fd_rate = anyfd.mean();
      row.any_fd_se = anyfd.se();
      row.fdr = fdp.mean();
      row.fdr_se = fdp.se();
      row.detection_rate = det.mean();
      row.detection_se = det.se();
      row.exceed_u_rate = static_cast<double>(exceed) / static_cast<double>(n_sims);
      table.rows.push_back(row);
    }
  }
  return table;
}

std::string CompareTable::to_csv() const {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "scenario,procedure,runs,sensitivity,sensitivity_se,any_fd_rate,any_fd_se,fdr,fdr_se,"
         "detection_rate,detection_se,exceed_u_rate\n";
  for (const auto& r : rows) {
    out << r.scenario << ',' << to_string(r.procedure) << ',' << r.runs << ',' << r.sensitivity << ','
        << r.sensitivity_se << ',' << r.any_fd_rate << ',' << r.any_fd_se << ',' << r.fdr << ',' << r.fdr_se << ','
        << r.detection_rate << ',' << r.detection_se << ',' << r.exceed_u_rate << '\n';
  }
  return out.str();
}

std::vector<Scenario> default_scenarios(const SimConfig& sim, std::uint64_t seed) {
  const double sd = estimate_baseline_sd(sim, seed);
  const std::size_t cols = std::min(sim.layout_columns, sim.channels);
  std::vector<std::size_t> block{0};
  if (cols > 1) block.push_back(1);
  if (sim.channels > cols) {
    block.push_back(cols);
    if (cols > 1 && sim.channels > cols + 1) block.push_back(cols + 1);
  }
  const std::size_t f0 = sim.freqs > 10 ? 1 : 0, t0 = sim.times > 10 ? (sim.times - 10) / 2 : 0;
  std::vector<Scenario> out;
  out.push_back({"null", std::nullopt});
  out.push_back({"narrow",
                 single_variable_effect({sim.channels / 2, sim.freqs / 2, sim.times / 2},
                                        amplitude_for_accuracy(0.8, sd))});
  out.push_back({"broad", block_effect(block, f0, std::min(sim.freqs, f0 + 10), t0, std::min(sim.times, t0 + 10),
                                       amplitude_for_accuracy(0.75, sd))});
  return out;
}

}  // namespace masstest
