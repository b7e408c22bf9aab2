#include "masstest/cli.hpp"

#include "masstest/classify.hpp"
#include "masstest/cluster.hpp"
#include "masstest/core_data.hpp"
#include "masstest/error.hpp"
#include "masstest/mcp.hpp"
#include "masstest/parallel.hpp"
#include "masstest/pipeline.hpp"
#include "masstest/report.hpp"
#include "masstest/simulate.hpp"
#include "masstest/tfr.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <iostream>
#include <sstream>

namespace masstest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed{0};
  int threads{0};
  std::string out_dir{"."};
};

struct PipelineFlags {
  double alpha{0.05};
  std::size_t k{15};
  std::size_t u{5};
  std::size_t v{5};
  std::string metric{"accuracy"};
  std::optional<double> mu;
  double l2{1.0};
};

void add_pipeline_flags(CLI::App* cmd, PipelineFlags& f) {
  cmd->add_option("--alpha", f.alpha, "BH level per step")->capture_default_str();
  cmd->add_option("--k", f.k, "cross-validation folds")->capture_default_str();
  cmd->add_option("--u", f.u, "DCT rows kept")->capture_default_str();
  cmd->add_option("--v", f.v, "DCT columns kept")->capture_default_str();
  cmd->add_option("--metric", f.metric, "accuracy | f1")
      ->check(CLI::IsMember({"accuracy", "f1"}))
      ->capture_default_str();
  cmd->add_option("--mu", f.mu, "chance level of the metric (default 0.5 for accuracy)");
  cmd->add_option("--l2", f.l2, "ridge penalty of the classifier")->capture_default_str();
}

PipelineConfig pipeline_config(const PipelineFlags& f, const Globals& g) {
  PipelineConfig cfg;
  cfg.alpha = f.alpha;
  cfg.k = f.k;
  cfg.u = f.u;
  cfg.v = f.v;
  cfg.metric = metric_from_string(f.metric);
  cfg.mu = f.mu;
  cfg.l2 = f.l2;
  cfg.seed = g.seed;
  cfg.threads = g.threads;
  return cfg;
}

class Output {
 public:
  Output(const Globals& g, std::ostream& out) : dir_(g.out_dir), out_(out) {}

  fs::path path(const std::string& name) const { return dir_ / name; }

  void text(const std::string& name, const std::string& content) {
    const fs::path p = path(name);
    write_text(p, content);
    announce(p);
  }
  void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
  void announce(const fs::path& p) {
    out_ << "wrote " << p.string() << "\n";
    written_.push_back(p.filename().string());
  }
  const std::vector<std::string>& written() const { return written_; }

 private:
  fs::path dir_;
  std::ostream& out_;
  std::vector<std::string> written_;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_{std::chrono::steady_clock::now()};
};

// Manifest: enough to re-execute the command. Timings live only here.
void write_manifest(Output& o, const std::string& command, const std::vector<std::string>& args, const Globals& g,
                    const json& config, const json& inputs, const json& timings) {
  json m{{"tool", "masstest"}, {"version", kVersion}, {"command", command}, {"argv", args},
         {"seed", g.seed},     {"threads", g.threads}, {"config", config},  {"inputs", inputs},
         {"outputs", o.written()}, {"timings_s", timings}};
  o.json_file("manifest.json", m);
}

std::vector<std::size_t> parse_index_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(static_cast<std::size_t>(std::stoul(item)));
  }
  return out;
}

// "a:b" half-open range.
std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("range must look like a:b, got '" + text + "'");
  return {std::stoul(text.substr(0, colon)), std::stoul(text.substr(colon + 1))};
}

SimConfig sim_from_json(const json& j, SimConfig cfg = {}) {
  cfg.channels = j.value("channels", cfg.channels);
  cfg.freqs = j.value("freqs", cfg.freqs);
  cfg.times = j.value("times", cfg.times);
  cfg.trials_per_condition = j.value("trials_per_condition", cfg.trials_per_condition);
  cfg.noise_sigma = j.value("noise_sigma", cfg.noise_sigma);
  cfg.smoothing = j.value("smoothing", cfg.smoothing);
  cfg.channel_correlation = j.value("channel_correlation", cfg.channel_correlation);
  cfg.spatial_rank = j.value("spatial_rank", cfg.spatial_rank);
  cfg.layout_columns = j.value("layout_columns", cfg.layout_columns);
  return cfg;
}

json sim_to_json(const SimConfig& c) {
  return json{{"channels", c.channels},
              {"freqs", c.freqs},
              {"times", c.times},
              {"trials_per_condition", c.trials_per_condition},
              {"noise_sigma", c.noise_sigma},
              {"smoothing", c.smoothing},
              {"channel_correlation", c.channel_correlation},
              {"spatial_rank", c.spatial_rank},
              {"layout_columns", c.layout_columns}};
}

json effect_to_json(const EffectSpec& e) {
  json members = json::array();
  for (const auto& v : e.members) members.push_back({v.channel, v.freq, v.time});
  return json{{"shape", e.shape}, {"amplitude", e.amplitude}, {"members", std::move(members)}};
}

// Effect JSON: {"members": [[c,f,t],...]} or {"channels": [...], "freqs": [f0,f1],
// "times": [t0,t1]}, with "amplitude" or "target_accuracy".
std::optional<EffectSpec> effect_from_json(const json& j, const SimConfig& sim, std::uint64_t seed) {
  if (j.is_null()) return std::nullopt;
  double amplitude = 0.0;
  if (j.contains("target_accuracy")) {
    amplitude = amplitude_for_accuracy(j.at("target_accuracy").get<double>(), estimate_baseline_sd(sim, seed));
  } else {
    amplitude = j.value("amplitude", 0.0);
  }
  EffectSpec e;
  if (j.contains("members")) {
    for (const auto& m : j.at("members")) {
      e.members.push_back({m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(), m.at(2).get<std::size_t>()});
    }
    std::sort(e.members.begin(), e.members.end());
    e.members.erase(std::unique(e.members.begin(), e.members.end()), e.members.end());
    e.amplitude = amplitude;
    e.shape = e.members.size() > 1 ? "broad" : "narrow";
  } else {
    const auto ch = j.at("channels").get<std::vector<std::size_t>>();
    const auto fr = j.at("freqs").get<std::vector<std::size_t>>();
    const auto tr = j.at("times").get<std::vector<std::size_t>>();
    if (fr.size() != 2 || tr.size() != 2) throw std::invalid_argument("effect freqs/times must be [begin, end)");
    e = block_effect(ch, fr[0], fr[1], tr[0], tr[1], amplitude);
  }
  if (j.contains("shape")) e.shape = j.at("shape").get<std::string>();
  return e;
}

json read_json(const fs::path& file) {
  try {
    return json::parse(read_text(file));
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in " + file.string() + ": " + e.what());
  }
}

std::vector<double> read_pvalues(const fs::path& file) {
  std::istringstream in(read_text(file));
  std::vector<double> p;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::replace(line.begin(), line.end(), ',', ' ');
    std::replace(line.begin(), line.end(), ';', ' ');
    std::replace(line.begin(), line.end(), '\t', ' ');
    std::istringstream row(line);
    std::string tok;
    std::vector<double> values;
    bool numeric = true;
    while (row >> tok) {
      if (tok.back() == '\r') tok.pop_back();
      if (tok.empty()) continue;
      double x = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), x);
      if (ec != std::errc() || ptr != tok.data() + tok.size()) {
        numeric = false;
        break;
      }
      values.push_back(x);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;
      }
      throw DataError("non-numeric entry in " + file.string() + ": '" + line + "'");
    }
    first = false;
    p.insert(p.end(), values.begin(), values.end());
  }
  if (p.empty()) throw DataError("no p-values in " + file.string());
  return p;
}

SensorLayout resolve_layout(const std::string& layout_file, const TFRTensor& tensor) {
  if (!layout_file.empty()) return load_layout(layout_file);
  if (tensor.layout()) return *tensor.layout();
  throw DataError("no sensor layout: pass --layout or store one with the dataset");
}

// ---------------------------------------------------------------------------

struct RunFlags {
  std::string dataset;
  std::string layout;
  bool csv{false};
  bool topomap{false};
  std::size_t window_bins{5};
  PipelineFlags pipeline;
};

void cmd_run(const RunFlags& f, const Globals& g, const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
  Stopwatch total;
  const TFRTensor tensor = load_tfr(f.dataset);
  const PipelineConfig cfg = pipeline_config(f.pipeline, g);
  const PipelineReport report = run_pipeline(tensor, cfg);
  for (const auto& w : report.warnings) err << "warning: " << w << "\n";

  Output o(g, out);
  o.json_file("result.json", to_json(report, tensor));
  if (f.csv) o.text("tests.csv", pipeline_tests_csv(report, tensor));
  if (f.topomap) {
    TopomapOptions opt;
    opt.window_bins = f.window_bins;
    const Topomap map = build_topomap(report.sets.scft, tensor, resolve_layout(f.layout, tensor), opt);
    o.text("topomap.svg", map.svg);
    o.text("topomap.csv", map.csv);
  }
  json timings;
  for (const auto& s : report.steps) timings["step" + std::to_string(s.step)] = s.seconds;
  timings["total"] = total.seconds();
  write_manifest(o, "run", args, g, to_json(cfg), {{"dataset", f.dataset}, {"dataset_hash", dataset_hash(tensor)}},
                 timings);
  out << "SC=" << report.sets.sc.size() << " SCF=" << report.sets.scf.size() << " SCFT=" << report.sets.scft.size()
      << " stop_stage=" << stop_stage_code(report.stop_stage) << "\n";
}

struct ClusterFlags {
  std::string dataset;
  std::string layout;
  ClusterTestConfig cfg;
  double radius{0.0};
};

void cmd_cluster(ClusterFlags f, const Globals& g, const std::vector<std::string>& args, std::ostream& out) {
  Stopwatch total;
  const TFRTensor tensor = load_tfr(f.dataset);
  const SensorLayout layout = resolve_layout(f.layout, tensor);
  f.cfg.seed = g.seed;
  f.cfg.threads = g.threads;
  if (f.radius > 0.0) f.cfg.radius = f.radius;
  const ClusterTestResult result = cluster_permutation_test(tensor, layout, f.cfg);

  Output o(g, out);
  o.json_file("clusters.json", to_json(result, tensor, f.cfg));
  o.text("pvalues.csv", cluster_pvalues_csv(result, tensor));
  write_manifest(o, "cluster", args, g, to_json(f.cfg),
                 {{"dataset", f.dataset}, {"dataset_hash", dataset_hash(tensor)}, {"layout", f.layout}},
                 {{"total", total.seconds()}});
  std::size_t sig = 0;
  for (const auto& c : result.clusters) sig += c.significant ? 1 : 0;
  out << "clusters=" << result.clusters.size() << " significant=" << sig << "\n";
}

struct CorrectFlags {
  std::string pfile;
  std::string method{"bh"};
  double alpha{0.05};
};

void cmd_correct(const CorrectFlags& f, const Globals& g, const std::vector<std::string>& args, std::ostream& out) {
  Stopwatch total;
  const auto p = read_pvalues(f.pfile);
  const RejectionResult r = correct(f.method, p, f.alpha);
  Output o(g, out);
  json j = to_json(r);
  j["pvalues"] = p;
  o.json_file("correction.json", j);
  std::ostringstream csv;
  csv << std::setprecision(17) << "index,p,rejected\n";
  for (std::size_t i = 0; i < p.size(); ++i) csv << i << ',' << p[i] << ',' << (r.rejected[i] ? 1 : 0) << '\n';
  o.text("mask.csv", csv.str());
  write_manifest(o, "correct", args, g, {{"method", f.method}, {"alpha", f.alpha}},
                 {{"pvalues", f.pfile}, {"pvalues_hash", file_hash(f.pfile)}}, {{"total", total.seconds()}});
  out << "mask:";
  for (std::size_t i = 0; i < p.size(); ++i) out << (i ? "," : " ") << (r.rejected[i] ? 1 : 0);
  out << "\n";
}

struct TfrFlags {
  std::string dataset;
  std::string output{"tfr"};
  double fmin{1.0}, fmax{45.0};
  std::size_t fcount{45};
  double tmin{0.0}, tmax{0.0}, tstep{0.05};
  double width_lo{4.0}, width_hi{8.0};
};

void cmd_tfr(const TfrFlags& f, const Globals& g, const std::vector<std::string>& args, std::ostream& out) {
  Stopwatch total;
  const Dataset ds = load_dataset(f.dataset);
  const auto* raw = std::get_if<TrialSet>(&ds);
  if (!raw) throw DataError(f.dataset + " is already a time-frequency dataset");
  if (f.fcount < 1) throw std::invalid_argument("--fcount must be at least 1");
  if (!(f.tstep > 0.0) || f.tmax < f.tmin) throw std::invalid_argument("need --tstep > 0 and --tmax >= --tmin");
  MorletConfig cfg;
  for (std::size_t i = 0; i < f.fcount; ++i) {
    cfg.freq_axis_hz.push_back(f.fcount == 1 ? f.fmin
                                             : f.fmin + (f.fmax - f.fmin) * static_cast<double>(i) /
                                                            static_cast<double>(f.fcount - 1));
  }
  const auto steps = static_cast<std::size_t>(std::floor((f.tmax - f.tmin) / f.tstep + 1e-9));
  for (std::size_t i = 0; i <= steps; ++i) cfg.time_axis_s.push_back(f.tmin + f.tstep * static_cast<double>(i));
  cfg.width_lo = f.width_lo;
  cfg.width_hi = f.width_hi;
  cfg.threads = g.threads;
  const TFRTensor tensor = morlet_power(*raw, cfg);

  Output o(g, out);
  const fs::path dir = o.path(f.output);
  save_dataset(tensor, dir);
  o.announce(dir / "meta.json");
  o.announce(dir / "data.bin");
  json config{{"fmin", f.fmin},   {"fmax", f.fmax},   {"fcount", f.fcount},     {"tmin", f.tmin},
              {"tmax", f.tmax},   {"tstep", f.tstep}, {"width_lo", f.width_lo}, {"width_hi", f.width_hi}};
  write_manifest(o, "tfr", args, g, config,
                 {{"dataset", f.dataset}, {"dataset_hash", dataset_hash(*raw)}, {"output_hash", dataset_hash(tensor)}},
                 {{"total", total.seconds()}});
}

struct SimulateFlags {
  std::string scenario;
  std::string output{"dataset"};
  SimConfig sim;
  std::string effect_channels;
  std::string effect_freqs;
  std::string effect_times;
  double amplitude{0.0};
  double target_accuracy{0.0};
};

void cmd_simulate(const SimulateFlags& f, const CLI::App& cmd, const Globals& g, const std::vector<std::string>& args,
                  std::ostream& out) {
  Stopwatch total;
  json spec = f.scenario.empty() ? json::object() : read_json(f.scenario);
  SimConfig sim = sim_from_json(spec.value("sim", json::object()));
  // Explicit flags override the scenario file.
  auto given = [&](const char* name) { return cmd.count(name) > 0; };
  if (given("--channels")) sim.channels = f.sim.channels;
  if (given("--freqs")) sim.freqs = f.sim.freqs;
  if (given("--times")) sim.times = f.sim.times;
  if (given("--trials-per-condition")) sim.trials_per_condition = f.sim.trials_per_condition;
  if (given("--noise-sigma")) sim.noise_sigma = f.sim.noise_sigma;
  if (given("--smoothing")) sim.smoothing = f.sim.smoothing;
  if (given("--channel-correlation")) sim.channel_correlation = f.sim.channel_correlation;
  if (given("--columns")) sim.layout_columns = f.sim.layout_columns;

  json effect_json = spec.value("effect", json(nullptr));
  if (!f.effect_channels.empty()) {
    const auto [f0, f1] = parse_range(f.effect_freqs.empty() ? "0:" + std::to_string(sim.freqs) : f.effect_freqs);
    const auto [t0, t1] = parse_range(f.effect_times.empty() ? "0:" + std::to_string(sim.times) : f.effect_times);
    effect_json = json{{"channels", parse_index_list(f.effect_channels)}, {"freqs", {f0, f1}}, {"times", {t0, t1}}};
    if (given("--target-accuracy")) {
      effect_json["target_accuracy"] = f.target_accuracy;
    } else {
      effect_json["amplitude"] = f.amplitude;
    }
  }
  const auto effect = effect_from_json(effect_json, sim, derive_seed(g.seed, {0xca1}));
  const TFRTensor tensor = gen_dataset(sim, effect, g.seed);

  Output o(g, out);
  const fs::path dir = o.path(f.output);
  save_dataset(tensor, dir);
  o.announce(dir / "meta.json");
  o.announce(dir / "data.bin");
  o.json_file("truth.json", effect ? effect_to_json(*effect) : json(nullptr));
  write_manifest(o, "simulate", args, g, {{"sim", sim_to_json(sim)}, {"effect", effect_json}},
                 {{"scenario", f.scenario}, {"output_hash", dataset_hash(tensor)}}, {{"total", total.seconds()}});
}

struct CompareFlags {
  std::string scenario;
  std::size_t n_sims{20};
  std::string procedures{"pipeline,cluster,bh,tmax,ktms"};
  std::size_t n_perm{200};
  std::size_t cluster_n_perm{200};
  std::size_t ktms_u{1};
  double alpha{0.05};
  PipelineFlags pipeline;
};

void cmd_compare(const CompareFlags& f, const CLI::App& cmd, const Globals& g, const std::vector<std::string>& args,
                 std::ostream& out) {
  Stopwatch total;
  json spec = f.scenario.empty() ? json::object() : read_json(f.scenario);
  CompareConfig cfg;
  cfg.sim = sim_from_json(spec.value("sim", json::object()));
  cfg.pipeline = pipeline_config(f.pipeline, g);
  if (spec.contains("pipeline")) {
    const auto& p = spec["pipeline"];
    cfg.pipeline.alpha = p.value("alpha", cfg.pipeline.alpha);
    cfg.pipeline.k = p.value("k", cfg.pipeline.k);
    cfg.pipeline.u = p.value("u", cfg.pipeline.u);
    cfg.pipeline.v = p.value("v", cfg.pipeline.v);
  }
  cfg.cluster.n_perm = spec.value("cluster_n_perm", f.cluster_n_perm);
  if (cmd.count("--cluster-n-perm")) cfg.cluster.n_perm = f.cluster_n_perm;
  cfg.permutation.n_perm = spec.value("n_perm", f.n_perm);
  if (cmd.count("--n-perm")) cfg.permutation.n_perm = f.n_perm;
  cfg.ktms_u = cmd.count("--ktms-u") ? f.ktms_u : spec.value("ktms_u", f.ktms_u);
  cfg.alpha = cmd.count("--alpha-mcp") ? f.alpha : spec.value("alpha", f.alpha);
  cfg.threads = g.threads;

  std::size_t n_sims = cmd.count("--n-sims") ? f.n_sims : spec.value("n_sims", f.n_sims);
  std::vector<Procedure> procs;
  if (spec.contains("procedures") && !cmd.count("--procedures")) {
    for (const auto& p : spec["procedures"]) procs.push_back(procedure_from_string(p.get<std::string>()));
  } else {
    for (std::stringstream ss(f.procedures); ss.good();) {
      std::string name;
      std::getline(ss, name, ',');
      if (!name.empty()) procs.push_back(procedure_from_string(name));
    }
  }

  std::vector<Scenario> scenarios;
  const std::uint64_t calib = derive_seed(g.seed, {0xca1});
  if (spec.contains("scenarios")) {
    for (const auto& s : spec["scenarios"]) {
      scenarios.push_back({s.at("name").get<std::string>(),
                           effect_from_json(s.value("effect", json(nullptr)), cfg.sim, calib)});
    }
  } else {
    scenarios = default_scenarios(cfg.sim, calib);
  }

  const CompareTable table = compare_procedures(scenarios, procs, n_sims, g.seed, cfg);
  Output o(g, out);
  o.text("compare.csv", table.to_csv());
  json scen = json::array();
  for (const auto& s : scenarios) {
    scen.push_back({{"name", s.name}, {"effect", s.effect ? effect_to_json(*s.effect) : json(nullptr)}});
  }
  json rows = json::array();
  for (const auto& r : table.rows) {
    rows.push_back({{"scenario", r.scenario},
                    {"procedure", to_string(r.procedure)},
                    {"runs", r.runs},
                    {"sensitivity", r.sensitivity},
                    {"sensitivity_se", r.sensitivity_se},
                    {"any_fd_rate", r.any_fd_rate},
                    {"any_fd_se", r.any_fd_se},
                    {"fdr", r.fdr},
                    {"fdr_se", r.fdr_se},
                    {"detection_rate", r.detection_rate},
                    {"detection_se", r.detection_se},
                    {"exceed_u_rate", r.exceed_u_rate}});
  }
  json config{{"sim", sim_to_json(cfg.sim)},
              {"pipeline", to_json(cfg.pipeline)},
              {"cluster", to_json(cfg.cluster)},
              {"n_perm", cfg.permutation.n_perm},
              {"ktms_u", cfg.ktms_u},
              {"alpha", cfg.alpha},
              {"n_sims", n_sims},
              {"scenarios", scen}};
  o.json_file("compare.json", {{"config", config}, {"rows", rows}});
  write_manifest(o, "compare", args, g, config, {{"scenario", f.scenario}}, {{"total", total.seconds()}});
}

struct ValidityFlags {
  std::string dataset;
  std::size_t n_perm{100};
  PipelineFlags pipeline;
};

void cmd_validity(const ValidityFlags& f, const Globals& g, const std::vector<std::string>& args, std::ostream& out) {
  Stopwatch total;
  const TFRTensor tensor = load_tfr(f.dataset);
  const PipelineConfig cfg = pipeline_config(f.pipeline, g);
  const PermutationValidity v = permutation_validity(tensor, cfg, f.n_perm, derive_seed(g.seed, {0x9e}));
  Output o(g, out);
  json hist{{"stop_step1", v.stop_histogram[0]},
            {"stop_step2", v.stop_histogram[1]},
            {"stop_step3", v.stop_histogram[2]},
            {"findings", v.stop_histogram[3]}};
  o.json_file("validity.json", {{"n_perm", f.n_perm},
                                {"dataset_hash", dataset_hash(tensor)},
                                {"config", to_json(cfg)},
                                {"histogram", hist},
                                {"total_significant", v.total_significant},
                                {"stop_stages", v.stop_stages},
                                {"scft_sizes", v.scft_sizes}});
  write_manifest(o, "validity", args, g, to_json(cfg), {{"dataset", f.dataset}, {"dataset_hash", dataset_hash(tensor)}},
                 {{"total", total.seconds()}});
  out << "stop stages 1/2/3/findings: " << v.stop_histogram[0] << "/" << v.stop_histogram[1] << "/"
      << v.stop_histogram[2] << "/" << v.stop_histogram[3] << ", significant triples " << v.total_significant << "\n";
}

struct ImportFlags {
  std::string csv;
  std::string kind{"tfr"};
  double sample_rate{0.0};
  double time_step{0.05};
  std::string output{"imported"};
};

void cmd_import(const ImportFlags& f, const Globals& g, const std::vector<std::string>& args, std::ostream& out) {
  Output o(g, out);
  const fs::path dir = o.path(f.output);
  std::string hash;
  if (f.kind == "raw") {
    if (!(f.sample_rate > 0.0)) throw std::invalid_argument("--sample-rate is required for raw import");
    const TrialSet data = import_csv_raw(f.csv, f.sample_rate);
    save_dataset(data, dir);
    hash = dataset_hash(data);
  } else {
    const TFRTensor data = import_csv_tfr(f.csv, f.time_step);
    save_dataset(data, dir);
    hash = dataset_hash(data);
  }
  o.announce(dir / "meta.json");
  o.announce(dir / "data.bin");
  write_manifest(o, "import", args, g, {{"kind", f.kind}, {"sample_rate", f.sample_rate}, {"time_step", f.time_step}},
                 {{"csv", f.csv}, {"output_hash", hash}}, json::object());
}

// Drops --threads / --out-dir (both spellings) from a recorded argv.
std::vector<std::string> strip_globals(const std::vector<std::string>& argv) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const auto& a = argv[i];
    if (a == "--threads" || a == "--out-dir") {
      ++i;
      continue;
    }
    if (a.rfind("--threads=", 0) == 0 || a.rfind("--out-dir=", 0) == 0) continue;
    out.push_back(a);
  }
  return out;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical cross-validated and permutation-based mass-univariate testing", "masstest"};
  app.fallthrough();
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  Globals g;
  g.threads = default_thread_count();
  app.add_option("--seed", g.seed, "base random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (default MASSTEST_THREADS or all cores)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();

  RunFlags run_f;
  auto* run = app.add_subcommand("run", "hierarchical CV pipeline on a TFR dataset");
  run->add_option("dataset", run_f.dataset, "dataset directory")->required();
  run->add_option("--layout", run_f.layout, "sensor layout JSON (topomap)");
  run->add_flag("--csv", run_f.csv, "also write tests.csv");
  run->add_flag("--topomap", run_f.topomap, "also write topomap.svg and topomap.csv");
  run->add_option("--window-bins", run_f.window_bins, "time bins per topomap panel")->capture_default_str();
  add_pipeline_flags(run, run_f.pipeline);

  ClusterFlags cl_f;
  auto* cluster = app.add_subcommand("cluster", "cluster-mass permutation test");
  cluster->add_option("dataset", cl_f.dataset, "dataset directory")->required();
  cluster->add_option("--layout", cl_f.layout, "sensor layout JSON (default: stored with the dataset)");
  cluster->add_option("--sample-alpha", cl_f.cfg.sample_alpha)->capture_default_str();
  cluster->add_option("--test-alpha", cl_f.cfg.test_alpha)->capture_default_str();
  cluster->add_option("--min-neighbors", cl_f.cfg.min_neighbors)->capture_default_str();
  cluster->add_option("--n-perm", cl_f.cfg.n_perm)->capture_default_str();
  cluster->add_option("--radius", cl_f.radius, "adjacency radius (default 1.3 x median nearest-neighbour distance)");

  CorrectFlags co_f;
  auto* corr = app.add_subcommand("correct", "multiple-comparison correction of a p-value file");
  corr->add_option("pvalues", co_f.pfile, "CSV or whitespace separated p-values")->required();
  corr->add_option("--method", co_f.method)
      ->check(CLI::IsMember({"bonferroni", "holm", "bh", "by", "bky"}))
      ->capture_default_str();
  corr->add_option("--alpha", co_f.alpha)->capture_default_str();

  TfrFlags tfr_f;
  auto* tfr = app.add_subcommand("tfr", "Morlet time-frequency power of a raw dataset");
  tfr->add_option("dataset", tfr_f.dataset, "raw dataset directory")->required();
  tfr->add_option("--output", tfr_f.output, "output dataset name under --out-dir")->capture_default_str();
  tfr->add_option("--fmin", tfr_f.fmin)->capture_default_str();
  tfr->add_option("--fmax", tfr_f.fmax)->capture_default_str();
  tfr->add_option("--fcount", tfr_f.fcount)->capture_default_str();
  tfr->add_option("--tmin", tfr_f.tmin, "first analysis time (s)")->required();
  tfr->add_option("--tmax", tfr_f.tmax, "last analysis time (s)")->required();
  tfr->add_option("--tstep", tfr_f.tstep)->capture_default_str();
  tfr->add_option("--width-lo", tfr_f.width_lo)->capture_default_str();
  tfr->add_option("--width-hi", tfr_f.width_hi)->capture_default_str();

  SimulateFlags sim_f;
  auto* sim = app.add_subcommand("simulate", "generate a synthetic TFR dataset with a known effect");
  sim->add_option("--scenario", sim_f.scenario, "scenario JSON {sim, effect}");
  sim->add_option("--output", sim_f.output, "output dataset name under --out-dir")->capture_default_str();
  sim->add_option("--channels", sim_f.sim.channels)->capture_default_str();
  sim->add_option("--freqs", sim_f.sim.freqs)->capture_default_str();
  sim->add_option("--times", sim_f.sim.times)->capture_default_str();
  sim->add_option("--trials-per-condition", sim_f.sim.trials_per_condition)->capture_default_str();
  sim->add_option("--noise-sigma", sim_f.sim.noise_sigma)->capture_default_str();
  sim->add_option("--smoothing", sim_f.sim.smoothing)->capture_default_str();
  sim->add_option("--channel-correlation", sim_f.sim.channel_correlation)->capture_default_str();
  sim->add_option("--columns", sim_f.sim.layout_columns, "layout grid columns")->capture_default_str();
  sim->add_option("--effect-channels", sim_f.effect_channels, "comma separated channel indices");
  sim->add_option("--effect-freqs", sim_f.effect_freqs, "frequency bins a:b (half open)");
  sim->add_option("--effect-times", sim_f.effect_times, "time bins a:b (half open)");
  sim->add_option("--amplitude", sim_f.amplitude, "additive shift for the second condition");
  sim->add_option("--target-accuracy", sim_f.target_accuracy, "calibrate the amplitude to this Bayes accuracy");

  CompareFlags cmp_f;
  auto* cmp = app.add_subcommand("compare", "simulated comparison of testing procedures");
  cmp->add_option("--scenario", cmp_f.scenario, "comparison JSON {sim, scenarios, procedures, n_sims, ...}");
  cmp->add_option("--n-sims", cmp_f.n_sims)->capture_default_str();
  cmp->add_option("--procedures", cmp_f.procedures)->capture_default_str();
  cmp->add_option("--n-perm", cmp_f.n_perm, "relabellings for tmax / ktms")->capture_default_str();
  cmp->add_option("--cluster-n-perm", cmp_f.cluster_n_perm)->capture_default_str();
  cmp->add_option("--ktms-u", cmp_f.ktms_u)->capture_default_str();
  cmp->add_option("--alpha-mcp", cmp_f.alpha, "level for bh / tmax / ktms")->capture_default_str();
  add_pipeline_flags(cmp, cmp_f.pipeline);

  ValidityFlags val_f;
  auto* val = app.add_subcommand("validity", "pipeline on label permutations of a dataset");
  val->add_option("dataset", val_f.dataset, "dataset directory")->required();
  val->add_option("--n-perm", val_f.n_perm)->capture_default_str();
  add_pipeline_flags(val, val_f.pipeline);

  ImportFlags imp_f;
  auto* imp = app.add_subcommand("import", "convert a CSV toy dataset (label first, one row per trial)");
  imp->add_option("csv", imp_f.csv)->required();
  imp->add_option("--kind", imp_f.kind)->check(CLI::IsMember({"raw", "tfr"}))->capture_default_str();
  imp->add_option("--sample-rate", imp_f.sample_rate, "Hz (raw)");
  imp->add_option("--time-step", imp_f.time_step, "seconds between columns (tfr)")->capture_default_str();
  imp->add_option("--output", imp_f.output)->capture_default_str();

  std::string manifest;
  auto* replay = app.add_subcommand("replay", "re-run a command from its manifest.json");
  replay->add_option("manifest", manifest)->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run->parsed()) {
      cmd_run(run_f, g, args, out, err);
    } else if (cluster->parsed()) {
      cmd_cluster(cl_f, g, args, out);
    } else if (corr->parsed()) {
      cmd_correct(co_f, g, args, out);
    } else if (tfr->parsed()) {
      cmd_tfr(tfr_f, g, args, out);
    } else if (sim->parsed()) {
      cmd_simulate(sim_f, *sim, g, args, out);
    } else if (cmp->parsed()) {
      cmd_compare(cmp_f, *cmp, g, args, out);
    } else if (val->parsed()) {
      cmd_validity(val_f, g, args, out);
    } else if (imp->parsed()) {
      cmd_import(imp_f, g, args, out);
    } else if (replay->parsed()) {
      const json m = read_json(manifest);
      if (!m.contains("argv")) throw DataError(manifest + " has no recorded argv");
      std::vector<std::string> argv = strip_globals(m.at("argv").get<std::vector<std::string>>());
      if (!argv.empty() && argv.front() == "replay") throw DataError("refusing to replay a replay");
      argv.insert(argv.begin(), {"--threads", std::to_string(g.threads), "--out-dir", g.out_dir});
      return run_cli(argv, out, err);
    }
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace masstest
