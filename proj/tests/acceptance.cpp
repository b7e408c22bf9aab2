// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 when any
// criterion fails.

#include "masstest/cli.hpp"
#include "masstest/dct.hpp"
#include "masstest/mcp.hpp"
#include "masstest/parallel.hpp"
#include "masstest/pipeline.hpp"
#include "masstest/report.hpp"
#include "masstest/simulate.hpp"
#include "masstest/stats.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace masstest;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

int g_threads = 1;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// 1 -------------------------------------------------------------------------
Verdict dct_fidelity() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> dim(1, 16);
  std::normal_distribution<double> n(0.0, 1.0);
  double round = 0.0, parseval = 0.0, exact = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = dim(rng), k = dim(rng);
    std::vector<double> a(m * k);
    for (auto& x : a) x = n(rng);
    const auto b = dct2(a, m, k);
    const auto back = idct2(b);
    const auto ref = oracle::dct2_sum(a, m, k);
    double ea = 0.0, eb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      round = std::max(round, std::abs(back[i] - a[i]));
      exact = std::max(exact, std::abs(b.values[i] - ref[i]));
      ea += a[i] * a[i];
      eb += b.values[i] * b.values[i];
    }
    parseval = std::max(parseval, std::abs(ea - eb) / ea);
  }
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "roundtrip=" << round << " parseval_rel=" << parseval << " oracle=" << exact << " time=" << secs << "s";
  return {round < 1e-9 && parseval < 1e-9 && exact < 1e-12 && secs < 5.0, d.str()};
}

// 2 -------------------------------------------------------------------------
Verdict mcp_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> size(1, 50);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t mismatches = 0;
  auto same = [&](const RejectionResult& r, const std::vector<bool>& o) {
    if (r.rejected != o) ++mismatches;
  };
  for (int rep = 0; rep < 1000; ++rep) {
    const std::size_t m = size(rng);
    std::vector<double> p(m);
    // Mix of signal-like small p-values and uniform nulls.
    for (auto& x : p) x = u(rng) < 0.3 ? std::pow(u(rng), 6.0) : u(rng);
    const double alpha = rep % 2 ? 0.05 : 0.1;
    same(bh(p, alpha), oracle::bh(p, alpha));
    same(by(p, alpha), oracle::by(p, alpha));
    same(bky(p, alpha), oracle::bky(p, alpha));
    same(holm(p, alpha), oracle::holm(p, alpha));
    same(bonferroni(p, alpha), oracle::bonferroni(p, alpha));
  }
  const std::vector<double> worked{0.01, 0.02, 0.03, 0.9};
  const auto w = bh(worked, 0.05);
  const bool worked_ok = w.cutoff == 3 && w.rejected == std::vector<bool>{true, true, true, false};

  auto thr = [](std::size_t m) { return bonferroni(std::vector<double>(m, 0.5), 0.05).thresholds[0]; };
  // Rounded values, compared at their printed precision.
  const bool thresholds_ok = std::abs(thr(306) - 1.6e-4) < 0.05e-4 && std::abs(thr(45) - 0.001) < 0.0005 &&
                             std::abs(thr(60) - 8e-4) < 0.5e-4 && std::abs(thr(306 * 45 * 60) - 6e-8) < 0.5e-8;
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "mismatches=" << mismatches << " worked_bh_k=" << w.cutoff << " bonferroni=" << thr(306) << "/" << thr(45)
    << "/" << thr(60) << "/" << thr(306 * 45 * 60) << " time=" << secs << "s";
  return {mismatches == 0 && worked_ok && thresholds_ok && secs < 10.0, d.str()};
}

// 3 -------------------------------------------------------------------------
Verdict t_distribution() {
  double worst = 0.0;
  for (int dof = 1; dof <= 60; ++dof) {
    for (int i = -40; i <= 40; ++i) {
      const double t = 0.25 * i;
      worst = std::max(worst, std::abs(t_tail(t, dof) - oracle::t_tail(t, dof)));
    }
  }
  double zero = 0.0;
  for (int dof = 1; dof <= 60; ++dof) zero = std::max(zero, std::abs(t_tail(0.0, dof) - 0.5));
  const double cauchy = std::abs(t_tail(1.0, 1.0) - 0.25);
  std::ostringstream d;
  d << "max_err=" << worst << " t0_err=" << zero << " t1dof1_err=" << cauchy;
  return {worst < 1e-8 && zero < 1e-12 && cauchy < 1e-12, d.str()};
}

// 4 -------------------------------------------------------------------------
Verdict null_error_control() {
  const auto t0 = std::chrono::steady_clock::now();
  const SimConfig sim;
  std::size_t any = 0;
  std::array<std::size_t, 4> stages{};
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto tensor = gen_dataset(sim, std::nullopt, derive_seed(4, {i}));
    PipelineConfig cfg;
    cfg.seed = derive_seed(40, {i});
    cfg.threads = g_threads;
    const auto r = run_pipeline(tensor, cfg);
    any += r.sets.scft.empty() ? 0 : 1;
    ++stages[stop_stage_code(r.stop_stage) - 1];
  }
  const double rate = any / 100.0;
  const double bound = 0.05 + 1.96 * std::sqrt(0.05 * 0.95 / 100.0);
  std::ostringstream d;
  d << "any_discovery=" << rate << " bound=" << fmt("%.4f", bound) << " stops=" << stages[0] << "/" << stages[1]
    << "/" << stages[2] << "/" << stages[3] << " time=" << fmt("%.1f", seconds_since(t0)) << "s";
  return {rate <= bound, d.str()};
}

// 5 -------------------------------------------------------------------------
Verdict permuted_label_validity() {
  const auto t0 = std::chrono::steady_clock::now();
  const SimConfig sim;
  const auto scen = default_scenarios(sim, 5);
  const auto& broad = scen[2];
  const auto tensor = gen_dataset(sim, broad.effect, 55);
  PipelineConfig cfg;
  cfg.seed = 555;
  cfg.threads = g_threads;
  const auto v = permutation_validity(tensor, cfg, 100, 5555);
  std::size_t empty = 0;
  for (auto s : v.scft_sizes) empty += s == 0;
  std::ostringstream d;
  d << "empty_scft=" << empty << "/100 stop1=" << v.stop_histogram[0] << "% stops=" << v.stop_histogram[0] << "/"
    << v.stop_histogram[1] << "/" << v.stop_histogram[2] << "/" << v.stop_histogram[3]
    << " total_triples=" << v.total_significant << " time=" << fmt("%.1f", seconds_since(t0)) << "s";
  return {empty >= 93 && v.stop_histogram[0] >= 80, d.str()};
}

// 6 -------------------------------------------------------------------------
Verdict pipeline_sensitivity() {
  const auto t0 = std::chrono::steady_clock::now();
  const SimConfig sim;
  const auto broad = *default_scenarios(sim, 6)[2].effect;
  double sens = 0.0, fdp = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const auto tensor = gen_dataset(sim, broad, derive_seed(6, {i}));
    PipelineConfig cfg;
    cfg.seed = derive_seed(60, {i});
    cfg.threads = g_threads;
    const auto m = evaluate(run_pipeline(tensor, cfg).sets, broad);
    sens += m.sensitivity / 50.0;
    fdp += m.false_discovery_proportion / 50.0;
  }
  std::ostringstream d;
  d << "amplitude=" << fmt("%.4f", broad.amplitude) << " mean_sensitivity=" << fmt("%.3f", sens)
    << " mean_fdp=" << fmt("%.3f", fdp) << " time=" << fmt("%.1f", seconds_since(t0)) << "s";
  return {sens >= 0.5 && fdp <= 0.2, d.str()};
}

// 7 -------------------------------------------------------------------------
Verdict cluster_control_and_power() {
  const auto t0 = std::chrono::steady_clock::now();
  CompareConfig cfg;
  cfg.cluster.n_perm = 200;
  cfg.threads = g_threads;
  const auto scen = default_scenarios(cfg.sim, 7);
  const auto null_t = compare_procedures({scen[0]}, {Procedure::kCluster}, 200, 70, cfg);
  const auto broad_t = compare_procedures({scen[2]}, {Procedure::kCluster}, 100, 71, cfg);
  const auto narrow_t =
      compare_procedures({scen[1]}, {Procedure::kCluster, Procedure::kPipeline, Procedure::kBh}, 100, 72, cfg);
  const double null_rate = null_t.rows[0].any_fd_rate;
  const double bound = 0.05 + 1.96 * std::sqrt(0.05 * 0.95 / 200.0);
  const double broad_rate = broad_t.rows[0].detection_rate;
  std::map<Procedure, double> narrow;
  for (const auto& r : narrow_t.rows) narrow[r.procedure] = r.detection_rate;
  std::ostringstream d;
  d << "null_any=" << null_rate << " bound=" << fmt("%.4f", bound) << " broad_detect=" << broad_rate
    << " narrow_detect cluster/pipeline/bh=" << narrow[Procedure::kCluster] << "/" << narrow[Procedure::kPipeline]
    << "/" << narrow[Procedure::kBh] << " time=" << fmt("%.1f", seconds_since(t0)) << "s";
  const bool ok = null_rate <= bound && broad_rate >= 0.9 && narrow[Procedure::kCluster] < narrow[Procedure::kPipeline] &&
                  narrow[Procedure::kCluster] < narrow[Procedure::kBh];
  return {ok, d.str()};
}

// 8 -------------------------------------------------------------------------
Verdict tmax_exactness() {
  double worst = 0.0;
  std::size_t refs = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    const std::size_t trials = 8, vars = 5;
    std::vector<double> values(trials * vars);
    std::vector<int> labels(trials);
    for (std::size_t r = 0; r < trials; ++r) {
      labels[r] = r < 4 ? 0 : 1;
      for (std::size_t v = 0; v < vars; ++v) values[r * vars + v] = n(rng) + (labels[r] && v < seed % 3 ? 2.0 : 0.0);
    }
    PermutationScheme s;
    s.exhaustive = true;
    const auto res = tmax_test(DataMatrix{values, trials, vars, labels}, s);
    refs = res.n_reference;

    // Exact enumeration over bit masks with an independent pooled t.
    auto tvec = [&](std::uint32_t mask) {
      std::vector<double> out(vars);
      for (std::size_t v = 0; v < vars; ++v) {
        std::vector<double> a, b;
        for (std::size_t r = 0; r < trials; ++r) ((mask >> r) & 1u ? a : b).push_back(values[r * vars + v]);
        out[v] = oracle::pooled_t(a, b);
      }
      return out;
    };
    std::uint32_t observed = 0;
    for (std::size_t r = 0; r < trials; ++r) observed |= labels[r] ? 1u << r : 0u;
    const auto obs = tvec(observed);
    std::vector<double> maxima;
    for (std::uint32_t mask = 0; mask < 256; ++mask) {
      if (__builtin_popcount(mask) != 4) continue;
      double mx = 0.0;
      for (double x : tvec(mask)) mx = std::max(mx, std::abs(x));
      maxima.push_back(mx);
    }
    for (std::size_t v = 0; v < vars; ++v) {
      std::size_t hits = 0;
      for (double m : maxima) hits += m >= std::abs(obs[v]) * (1.0 - 1e-12);
      worst = std::max(worst, std::abs(res.p[v] - double(hits) / double(maxima.size())));
    }
  }
  std::ostringstream d;
  d << "partitions=" << refs << " max_abs_diff=" << worst;
  return {refs == 70 && worst < 1e-12, d.str()};
}

// 9 -------------------------------------------------------------------------
int cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  if (code != 0) std::cerr << err.str();
  return code;
}

std::map<std::string, std::string> result_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    out[fs::relative(e.path(), dir).string()] = read_text(e.path());
  }
  return out;
}

Verdict determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path root = fs::temp_directory_path() / ("masstest_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(root);
  const auto small = root / "small.json";
  write_text(small, R"({"sim": {"channels": 6, "freqs": 8, "times": 10, "trials_per_condition": 40, "layout_columns": 3}})");
  const auto pfile = root / "p.csv";
  write_text(pfile, "0.001,0.04,0.012,0.3,0.0049,0.8\n");
  // Raw dataset for the tfr command.
  {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> raw(8 * 2 * 500);
    for (auto& x : raw) x = n(rng);
    save_dataset(TrialSet(8, 2, 500, raw, 250.0, {"A", "B"}, LabelVector::from_names({"a", "a", "a", "a", "b", "b", "b", "b"})),
                 root / "raw");
  }
  const std::vector<std::string> pipe{"--k", "8", "--u", "3", "--v", "3"};
  // Each entry: command name, arguments after the globals.
  std::vector<std::pair<std::string, std::vector<std::string>>> commands{
      {"simulate", {"simulate", "--scenario", small.string(), "--effect-channels", "1,2", "--effect-freqs", "1:5",
                    "--effect-times", "2:7", "--target-accuracy", "0.85"}},
      {"run", {"run", "DATASET", "--csv", "--topomap"}},
      {"cluster", {"cluster", "DATASET", "--n-perm", "100"}},
      {"validity", {"validity", "DATASET", "--n-perm", "6"}},
      {"correct", {"correct", pfile.string(), "--method", "bky"}},
      {"tfr", {"tfr", (root / "raw").string(), "--fmin", "4", "--fmax", "30", "--fcount", "6", "--tmin", "0.6",
               "--tmax", "1.4"}},
      {"compare", {"compare", "--scenario", small.string(), "--n-sims", "2", "--procedures",
                   "pipeline,cluster,bh,tmax,ktms", "--n-perm", "50", "--cluster-n-perm", "50", "--k", "8", "--u", "3",
                   "--v", "3"}},
  };
  for (auto& [name, a] : commands) {
    if (name == "run" || name == "validity") a.insert(a.end(), pipe.begin(), pipe.end());
  }

  std::size_t compared = 0, differing = 0, failures = 0;
  const auto dataset = root / "t1" / "simulate" / "dataset";
  for (auto& [name, a] : commands) {
    for (auto& x : a) {
      if (x == "DATASET") x = dataset.string();
    }
    std::map<std::string, std::string> reference;
    for (const int threads : {1, 2, 8}) {
      const auto dir = root / ("t" + std::to_string(threads)) / name;
      std::vector<std::string> args{"--seed", "9", "--threads", std::to_string(threads), "--out-dir", dir.string()};
      args.insert(args.end(), a.begin(), a.end());
      failures += cli(args) != 0;
      const auto replay_dir = root / ("r" + std::to_string(threads)) / name;
      failures += cli({"--threads", std::to_string(threads), "--out-dir", replay_dir.string(), "replay",
                       (dir / "manifest.json").string()}) != 0;
      for (const auto& d : {dir, replay_dir}) {
        const auto files = result_files(d);
        if (reference.empty()) {
          reference = files;
          continue;
        }
        ++compared;
        differing += files != reference;
      }
    }
  }
  std::error_code ec;
  fs::remove_all(root, ec);
  std::ostringstream d;
  d << "commands=" << commands.size() << " comparisons=" << compared << " differing=" << differing
    << " failed_runs=" << failures << " threads=1,2,8 time=" << fmt("%.1f", seconds_since(t0)) << "s";
  return {differing == 0 && failures == 0, d.str()};
}

// 10 ------------------------------------------------------------------------
Verdict end_to_end_runtime() {
  SimConfig sim;
  sim.channels = 20;
  sim.layout_columns = 5;
  const auto scen = default_scenarios(sim, 10);
  const auto tensor = gen_dataset(sim, scen[2].effect, 100);
  const auto t0 = std::chrono::steady_clock::now();
  PipelineConfig cfg;
  cfg.threads = 1;
  const auto r = run_pipeline(tensor, cfg);
  const double secs = seconds_since(t0);
  std::ostringstream d;
  d << "tensor=150x20x12x20 threads=1 time=" << fmt("%.2f", secs) << "s tests=" << r.tests_run(1) << "/"
    << r.tests_run(2) << "/" << r.tests_run(3);
  return {secs < 120.0, d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"masstest acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "criteria to run (default all)")->check(CLI::Range(1, 10));
  app.add_option("--threads", g_threads, "worker threads for the statistical checks")->check(CLI::PositiveNumber);
  g_threads = default_thread_count();
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
      {"dct fidelity", dct_fidelity},
      {"mcp oracle equivalence", mcp_oracles},
      {"t distribution", t_distribution},
      {"pipeline null error control", null_error_control},
      {"permuted-label validity", permuted_label_validity},
      {"pipeline sensitivity", pipeline_sensitivity},
      {"cluster control and power", cluster_control_and_power},
      {"tmax exactness", tmax_exactness},
      {"determinism", determinism},
      {"end-to-end runtime", end_to_end_runtime},
  };
  const std::set<int> selected(only.begin(), only.end());
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " " << id << " " << criteria[i].first << ": " << v.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
