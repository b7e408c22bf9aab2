#include "masstest/report.hpp"

#include "masstest/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace masstest {

using nlohmann::json;

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t state) {
  for (const unsigned char b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

namespace {

template <class T>
std::uint64_t hash_values(std::span<const T> v, std::uint64_t state) {
  return fnv1a({reinterpret_cast<const unsigned char*>(v.data()), v.size_bytes()}, state);
}

std::uint64_t hash_string(const std::string& s, std::uint64_t state) {
  state = fnv1a({reinterpret_cast<const unsigned char*>(s.data()), s.size()}, state);
  const unsigned char sep = 0;
  return fnv1a({&sep, 1}, state);
}

std::string hex(std::uint64_t h) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::uint64_t hash_labels(const LabelVector& labels, std::uint64_t state) {
  for (const auto& n : labels.class_names()) state = hash_string(n, state);
  return hash_values(labels.codes(), state);
}

}  // namespace

std::string dataset_hash(const TFRTensor& tensor) {
  const auto& s = tensor.shape();
  const std::uint64_t dims[] = {s.trials, s.channels, s.freqs, s.times};
  std::uint64_t h = hash_values(std::span<const std::uint64_t>(dims), 0xcbf29ce484222325ULL);
  h = hash_values(std::span<const double>(tensor.freq_axis()), h);
  h = hash_values(std::span<const double>(tensor.time_axis()), h);
  for (const auto& n : tensor.channel_names()) h = hash_string(n, h);
  h = hash_labels(tensor.labels(), h);
  return hex(hash_values(tensor.power(), h));
}

std::string dataset_hash(const TrialSet& data) {
  const std::uint64_t dims[] = {data.trials(), data.channels(), data.samples()};
  std::uint64_t h = hash_values(std::span<const std::uint64_t>(dims), 0xcbf29ce484222325ULL);
  const double fs = data.sample_rate();
  h = hash_values(std::span<const double>(&fs, 1), h);
  for (const auto& n : data.channel_names()) h = hash_string(n, h);
  h = hash_labels(data.labels(), h);
  return hex(hash_values(data.data(), h));
}

std::string file_hash(const std::filesystem::path& file) {
  const std::string text = read_text(file);
  return hex(fnv1a({reinterpret_cast<const unsigned char*>(text.data()), text.size()}));
}

json to_json(const PipelineConfig& cfg) {
  json j{{"alpha", cfg.alpha}, {"k", cfg.k},   {"u", cfg.u},       {"v", cfg.v},
         {"metric", to_string(cfg.metric)}, {"mu", chance_level(cfg)}, {"seed", cfg.seed}, {"l2", cfg.l2}};
  return j;
}

json to_json(const RejectionResult& r) {
  json j{{"procedure", r.procedure}, {"alpha", r.alpha}, {"rejections", r.count()}, {"cutoff", r.cutoff}};
  std::vector<int> mask(r.rejected.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = r.rejected[i] ? 1 : 0;
  j["rejected"] = mask;
  j["thresholds"] = r.thresholds;
  if (r.alpha_prime) j["alpha_prime"] = *r.alpha_prime;
  if (r.alpha_double_prime) j["alpha_double_prime"] = *r.alpha_double_prime;
  if (r.stage1_rejections) j["stage1_rejections"] = *r.stage1_rejections;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// JSON cannot hold infinities; degenerate t values are written as strings.
json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

}  // namespace

json to_json(const PipelineReport& report, const TFRTensor& tensor) {
  const auto& names = tensor.channel_names();
  json sets;
  sets["SC"] = json::array();
  for (const auto c : report.sets.sc) sets["SC"].push_back({{"channel", c}, {"name", names[c]}});
  sets["SCF"] = json::array();
  for (const auto& [c, f] : report.sets.scf) {
    sets["SCF"].push_back({{"channel", c}, {"name", names[c]}, {"freq", f}, {"freq_hz", tensor.freq_axis()[f]}});
  }
  sets["SCFT"] = json::array();
  for (const auto& v : report.sets.scft) {
    sets["SCFT"].push_back({{"channel", v.channel},
                            {"name", names[v.channel]},
                            {"freq", v.freq},
                            {"freq_hz", tensor.freq_axis()[v.freq]},
                            {"time", v.time},
                            {"time_s", tensor.time_axis()[v.time]}});
  }

  json steps = json::array();
  for (const auto& s : report.steps) {
    json tests = json::array();
    for (const auto& t : s.tests) {
      json rec{{"channel", t.where.channel}, {"scores", t.scores.values}, {"mean", mean_of(t.scores.values)},
               {"sd", sd_of(t.scores.values)}, {"t", number(t.ttest.t)}, {"dof", t.ttest.dof},
               {"p", t.ttest.p}, {"degenerate", t.ttest.degenerate}, {"significant", t.significant}};
      if (s.step >= 2) rec["freq"] = t.where.freq;
      if (s.step == 3) rec["time"] = t.where.time;
      tests.push_back(std::move(rec));
    }
    steps.push_back({{"step", s.step}, {"tests_run", s.tests.size()}, {"correction", to_json(s.correction)},
                     {"tests", std::move(tests)}});
  }

  const auto& shape = tensor.shape();
  return json{{"tool", "masstest"},
              {"version", kVersion},
              {"dataset_hash", dataset_hash(tensor)},
              {"dims", {shape.trials, shape.channels, shape.freqs, shape.times}},
              {"config", to_json(report.config)},
              {"stop_stage", stop_stage_code(report.stop_stage)},
              {"warnings", report.warnings},
              {"sets", std::move(sets)},
              {"steps", std::move(steps)}};
}

json to_json(const ClusterTestConfig& cfg) {
  json j{{"sample_alpha", cfg.sample_alpha}, {"test_alpha", cfg.test_alpha}, {"min_neighbors", cfg.min_neighbors},
         {"n_perm", cfg.n_perm},             {"seed", cfg.seed}};
  j["radius"] = cfg.radius ? json(*cfg.radius) : json(nullptr);
  return j;
}

json to_json(const ClusterTestResult& result, const TFRTensor& tensor, const ClusterTestConfig& cfg) {
  json clusters = json::array();
  for (const auto& c : result.clusters) {
    json members = json::array();
    for (const auto& v : c.members) members.push_back({v.channel, v.freq, v.time});
    clusters.push_back({{"sign", c.sign},
                        {"mass", c.mass},
                        {"p", c.p},
                        {"significant", c.significant},
                        {"size", c.members.size()},
                        {"members", std::move(members)}});
  }
  const auto& shape = tensor.shape();
  return json{{"tool", "masstest"},
              {"version", kVersion},
              {"dataset_hash", dataset_hash(tensor)},
              {"dims", {shape.trials, shape.channels, shape.freqs, shape.times}},
              {"config", to_json(cfg)},
              {"threshold", result.threshold},
              {"clusters", std::move(clusters)},
              {"significant_variables", result.significant_variables().size()}};
}

std::string pipeline_tests_csv(const PipelineReport& report, const TFRTensor& tensor) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "step,channel,channel_name,freq,freq_hz,time,time_s,mean_score,sd_score,t,p,significant\n";
  for (const auto& s : report.steps) {
    for (const auto& t : s.tests) {
      const auto& w = t.where;
      out << s.step << ',' << w.channel << ',' << tensor.channel_names()[w.channel] << ',';
      if (s.step >= 2) {
        out << w.freq << ',' << tensor.freq_axis()[w.freq] << ',';
      } else {
        out << ",,";
      }
      if (s.step == 3) {
        out << w.time << ',' << tensor.time_axis()[w.time] << ',';
      } else {
        out << ",,";
      }
      out << mean_of(t.scores.values) << ',' << sd_of(t.scores.values) << ',' << t.ttest.t << ',' << t.ttest.p
          << ',' << (t.significant ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

std::string cluster_pvalues_csv(const ClusterTestResult& result, const TFRTensor& tensor) {
  const auto& s = tensor.shape();
  std::vector<long> cluster_of(s.variables(), -1);
  for (std::size_t k = 0; k < result.clusters.size(); ++k) {
    for (const auto& v : result.clusters[k].members) cluster_of[flat_index(s, v)] = static_cast<long>(k);
  }
  std::ostringstream out;
  out << std::setprecision(17);
  out << "channel,channel_name,freq_hz,time_s,t,p,cluster\n";
  for (std::size_t i = 0; i < s.variables(); ++i) {
    const auto v = variable_at(s, i);
    out << v.channel << ',' << tensor.channel_names()[v.channel] << ',' << tensor.freq_axis()[v.freq] << ','
        << tensor.time_axis()[v.time] << ',' << result.observed_t[i] << ',' << result.p[i] << ',';
    if (cluster_of[i] >= 0) out << cluster_of[i];
    out << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Topographic maps

std::vector<FrequencyBand> default_bands() {
  return {{"theta", 4.0, 7.0}, {"alpha", 8.0, 12.0}, {"beta", 13.0, 30.0}, {"gamma", 31.0, 45.0}};
}

Topomap build_topomap(const std::vector<VariableIndex>& significant, const TFRTensor& tensor,
                      const SensorLayout& layout, const TopomapOptions& options) {
  if (options.window_bins == 0) throw std::invalid_argument("window_bins must be positive");
  const SensorLayout ordered = layout_for_channels(layout, tensor.channel_names());
  const auto& freqs = tensor.freq_axis();
  const auto& times = tensor.time_axis();
  const std::size_t nch = tensor.shape().channels;

  // Band index per frequency bin; bands.size() = "other".
  std::vector<FrequencyBand> bands;
  std::vector<std::size_t> band_of(freqs.size(), 0);
  std::vector<std::size_t> used;
  bool other = false;
  for (std::size_t f = 0; f < freqs.size(); ++f) {
    std::size_t b = options.bands.size();
    for (std::size_t k = 0; k < options.bands.size(); ++k) {
      if (freqs[f] >= options.bands[k].lo_hz && freqs[f] <= options.bands[k].hi_hz) {
        b = k;
        break;
      }
    }
    band_of[f] = b;
    if (b == options.bands.size()) {
      other = true;
    } else if (std::find(used.begin(), used.end(), b) == used.end()) {
      used.push_back(b);
    }
  }
  std::sort(used.begin(), used.end());
  std::vector<std::size_t> row_of(options.bands.size() + 1, 0);
  for (std::size_t i = 0; i < used.size(); ++i) {
    bands.push_back(options.bands[used[i]]);
    row_of[used[i]] = i;
  }
  if (other) {
    row_of[options.bands.size()] = bands.size();
    bands.push_back({"other", 0.0, 0.0});
  }

  const std::size_t windows = (times.size() + options.window_bins - 1) / options.window_bins;
  Topomap map;
  for (const auto& b : bands) {
    for (std::size_t w = 0; w < windows; ++w) {
      TopomapPanel p;
      p.band = b.name;
      p.window = w;
      p.t0_s = times[w * options.window_bins];
      p.t1_s = times[std::min(times.size(), (w + 1) * options.window_bins) - 1];
      p.highlighted.assign(nch, false);
      map.panels.push_back(std::move(p));
    }
  }

  std::ostringstream csv;
  csv << std::setprecision(17);
  csv << "channel,channel_name,x,y,freq_hz,time_s,band,window\n";
  for (const auto& v : significant) {
    if (v.channel >= nch || v.freq >= freqs.size() || v.time >= times.size()) {
      throw std::out_of_range("significant triple outside the tensor");
    }
    const std::size_t row = row_of[band_of[v.freq]];
    const std::size_t w = v.time / options.window_bins;
    map.panels[row * windows + w].highlighted[v.channel] = true;
    const auto& pos = ordered.positions[v.channel];
    csv << v.channel << ',' << ordered.channel_names[v.channel] << ',' << pos.x << ',' << pos.y << ','
        << freqs[v.freq] << ',' << times[v.time] << ',' << bands[row].name << ',' << w << '\n';
  }
  map.csv = csv.str();

  // SVG: one row of panels per band, one column per time window.
  constexpr double kPanel = 160.0, kMargin = 20.0, kTitle = 18.0, kRadius = 5.0;
  double xmin = ordered.positions.empty() ? 0.0 : ordered.positions[0].x, xmax = xmin;
  double ymin = ordered.positions.empty() ? 0.0 : ordered.positions[0].y, ymax = ymin;
  for (const auto& p : ordered.positions) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
  const double inner = kPanel - 2.0 * kMargin;
  const double width = static_cast<double>(std::max<std::size_t>(windows, 1)) * kPanel;
  const double height = static_cast<double>(std::max<std::size_t>(bands.size(), 1)) * (kPanel + kTitle);

  std::ostringstream svg;
  svg << std::fixed << std::setprecision(2);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t i = 0; i < map.panels.size(); ++i) {
    const auto& p = map.panels[i];
    const double ox = static_cast<double>(i % windows) * kPanel;
    const double oy = static_cast<double>(i / windows) * (kPanel + kTitle);
    svg << "<g class=\"panel\" data-band=\"" << p.band << "\" data-window=\"" << p.window << "\">\n";
    svg << "<text x=\"" << ox + kPanel / 2 << "\" y=\"" << oy + kTitle - 4
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << p.band << ' ' << p.t0_s
        << "-" << p.t1_s << " s</text>\n";
    svg << "<rect x=\"" << ox + 4 << "\" y=\"" << oy + kTitle << "\" width=\"" << kPanel - 8 << "\" height=\""
        << kPanel - 8 << "\" fill=\"none\" stroke=\"#999\"/>\n";
    for (std::size_t c = 0; c < nch; ++c) {
      const auto& pos = ordered.positions[c];
      const double cx = ox + kMargin + (pos.x - xmin) / span * inner;
      const double cy = oy + kTitle + kMargin + (ymax - pos.y) / span * inner;
      if (p.highlighted[c]) {
        svg << "<circle class=\"sig\" cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << kRadius
            << "\" fill=\"#d62728\"><title>" << ordered.channel_names[c] << "</title></circle>\n";
      } else {
        svg << "<circle cx=\"" << cx << "\" cy=\"" << cy << "\" r=\"" << kRadius * 0.6
            << "\" fill=\"#bbb\"><title>" << ordered.channel_names[c] << "</title></circle>\n";
      }
    }
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  map.svg = svg.str();
  return map;
}

void write_text(const std::filesystem::path& file, const std::string& text) {
  if (file.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + file.parent_path().string() + ": " + ec.message());
  }
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("write failed: " + file.string());
}

std::string read_text(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace masstest
