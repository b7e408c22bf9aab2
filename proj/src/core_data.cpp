#include "masstest/core_data.hpp"

#include "masstest/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace masstest {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// LabelVector

LabelVector LabelVector::from_names(const std::vector<std::string>& names) {
  const std::set<std::string> distinct(names.begin(), names.end());
  if (distinct.size() != 2) {
    throw DataError("labels must contain exactly two distinct conditions, found " +
                    std::to_string(distinct.size()));
  }
  LabelVector out;
  out.class_names_ = {*distinct.begin(), *std::next(distinct.begin())};
  out.codes_.reserve(names.size());
  for (const auto& n : names) out.codes_.push_back(n == out.class_names_[0] ? 0 : 1);
  return out;
}

LabelVector LabelVector::from_codes(std::vector<int> codes,
                                    std::array<std::string, 2> class_names) {
  if (class_names[0] >= class_names[1]) {
    throw std::invalid_argument("class names must be distinct and in lexicographic order");
  }
  bool seen[2] = {false, false};
  for (const int c : codes) {
    if (c != 0 && c != 1) throw DataError("label codes must be 0 or 1");
    seen[c] = true;
  }
  if (!seen[0] || !seen[1]) throw DataError("labels must contain both conditions");
  LabelVector out;
  out.codes_ = std::move(codes);
  out.class_names_ = std::move(class_names);
  return out;
}

std::vector<std::string> LabelVector::names() const {
  std::vector<std::string> out;
  out.reserve(codes_.size());
  for (const int c : codes_) out.push_back(class_names_[c]);
  return out;
}

std::size_t LabelVector::count(int code) const {
  return static_cast<std::size_t>(std::count(codes_.begin(), codes_.end(), code));
}

LabelVector LabelVector::permuted(std::span<const std::size_t> order) const {
  if (order.size() != codes_.size()) throw std::invalid_argument("permutation length mismatch");
  LabelVector out;
  out.class_names_ = class_names_;
  out.codes_.resize(codes_.size());
  for (std::size_t i = 0; i < order.size(); ++i) out.codes_[i] = codes_.at(order[i]);
  return out;
}

// ---------------------------------------------------------------------------
// SensorLayout

void SensorLayout::validate() const {
  if (channel_names.size() != positions.size()) {
    throw DataError("layout has " + std::to_string(channel_names.size()) + " names but " +
                    std::to_string(positions.size()) + " positions");
  }
  std::unordered_set<std::string> seen;
  for (const auto& n : channel_names) {
    if (!seen.insert(n).second) throw DataError("duplicate channel name in layout: " + n);
  }
  for (const auto& p : positions) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DataError("non-finite layout position");
  }
}

std::optional<Vec2> SensorLayout::position_of(const std::string& name) const {
  const auto it = std::find(channel_names.begin(), channel_names.end(), name);
  if (it == channel_names.end()) return std::nullopt;
  return positions[static_cast<std::size_t>(it - channel_names.begin())];
}

// ---------------------------------------------------------------------------
// TrialSet / TFRTensor

namespace {

void check_finite(std::span<const double> values, const char* what) {
  for (const double v : values) {
    if (!std::isfinite(v)) throw DataError(std::string(what) + " contains NaN or Inf");
  }
}

void check_strictly_increasing(const std::vector<double>& axis, const char* what) {
  check_finite(axis, what);
  for (std::size_t i = 1; i < axis.size(); ++i) {
    if (!(axis[i] > axis[i - 1])) throw DataError(std::string(what) + " must be strictly increasing");
  }
}

void check_unique_names(const std::vector<std::string>& names) {
  std::unordered_set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw DataError("duplicate channel name: " + n);
  }
}

}  // namespace

TrialSet::TrialSet(std::size_t trials, std::size_t channels, std::size_t samples,
                   std::vector<double> data, double sample_rate_hz,
                   std::vector<std::string> channel_names, LabelVector labels,
                   std::optional<SensorLayout> layout)
    : trials_(trials),
      channels_(channels),
      samples_(samples),
      sample_rate_(sample_rate_hz),
      channel_names_(std::move(channel_names)),
      labels_(std::move(labels)),
      layout_(std::move(layout)) {
  if (trials == 0 || channels == 0 || samples == 0) throw DataError("raw dataset has an empty dimension");
  if (data.size() != trials * channels * samples) {
    throw DataError("raw data has " + std::to_string(data.size()) + " values, expected " +
                    std::to_string(trials * channels * samples));
  }
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) throw DataError("sample rate must be positive");
  if (channel_names_.size() != channels) throw DataError("channel name count does not match channels");
  check_unique_names(channel_names_);
  if (labels_.size() != trials) throw DataError("label count does not match trial count");
  check_finite(data, "raw data");
  if (layout_) layout_->validate();
  data_ = std::make_shared<const std::vector<double>>(std::move(data));
}

std::span<const double> TrialSet::series(std::size_t trial, std::size_t channel) const {
  return std::span<const double>(*data_).subspan((trial * channels_ + channel) * samples_, samples_);
}

TFRTensor::TFRTensor(TfrShape shape, std::vector<double> power, std::vector<double> freq_axis_hz,
                     std::vector<double> time_axis_s, std::vector<std::string> channel_names,
                     LabelVector labels, std::optional<SensorLayout> layout)
    : shape_(shape),
      freq_axis_(std::move(freq_axis_hz)),
      time_axis_(std::move(time_axis_s)),
      channel_names_(std::move(channel_names)),
      labels_(std::move(labels)),
      layout_(std::move(layout)) {
  if (shape.size() == 0) throw DataError("tfr dataset has an empty dimension");
  if (power.size() != shape.size()) {
    throw DataError("tfr data has " + std::to_string(power.size()) + " values, expected " +
                    std::to_string(shape.size()));
  }
  if (freq_axis_.size() != shape.freqs) throw DataError("frequency axis length does not match freqs");
  if (time_axis_.size() != shape.times) throw DataError("time axis length does not match times");
  if (channel_names_.size() != shape.channels) throw DataError("channel name count does not match channels");
  check_unique_names(channel_names_);
  if (labels_.size() != shape.trials) throw DataError("label count does not match trial count");
  check_strictly_increasing(freq_axis_, "frequency axis");
  check_strictly_increasing(time_axis_, "time axis");
  for (const double v : power) {
    if (!std::isfinite(v)) throw DataError("tfr power contains NaN or Inf");
    if (v < 0.0) throw DataError("tfr power must be non-negative");
  }
  if (layout_) layout_->validate();
  power_ = std::make_shared<const std::vector<double>>(std::move(power));
}

std::span<const double> TFRTensor::slab(std::size_t trial, std::size_t channel) const {
  const std::size_t block = shape_.freqs * shape_.times;
  return std::span<const double>(*power_).subspan((trial * shape_.channels + channel) * block, block);
}

std::span<const double> TFRTensor::trial(std::size_t trial) const {
  const std::size_t block = shape_.variables();
  return std::span<const double>(*power_).subspan(trial * block, block);
}

TFRTensor TFRTensor::with_labels(LabelVector labels) const {
  if (labels.size() != shape_.trials) throw DataError("label count does not match trial count");
  TFRTensor copy = *this;
  copy.labels_ = std::move(labels);
  return copy;
}

TFRTensor TFRTensor::with_layout(std::optional<SensorLayout> layout) const {
  if (layout) layout->validate();
  TFRTensor copy = *this;
  copy.layout_ = std::move(layout);
  return copy;
}

ChannelSlab slice_channel(const TFRTensor& tensor, std::size_t channel) {
  const auto& s = tensor.shape();
  if (channel >= s.channels) {
    throw std::out_of_range("channel index " + std::to_string(channel) + " out of range [0, " +
                            std::to_string(s.channels) + ")");
  }
  ChannelSlab out{s.trials, s.freqs, s.times, {}};
  out.values.reserve(s.trials * s.freqs * s.times);
  for (std::size_t r = 0; r < s.trials; ++r) {
    const auto block = tensor.slab(r, channel);
    out.values.insert(out.values.end(), block.begin(), block.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// On-disk format

namespace {

json read_json(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + file.string() + ": " + e.what());
  }
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("write failed: " + file.string());
}

std::vector<double> read_f64_le(const fs::path& file, std::size_t expected) {
  std::ifstream in(file, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + file.string());
  const auto bytes = static_cast<std::size_t>(in.tellg());
  if (bytes != expected * sizeof(double)) {
    throw DataError("data.bin holds " + std::to_string(bytes) + " bytes, metadata implies " +
                    std::to_string(expected * sizeof(double)));
  }
  in.seekg(0);
  std::vector<double> values(expected);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(bytes));
  if (!in) throw IoError("read failed: " + file.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      bits = __builtin_bswap64(bits);
      v = std::bit_cast<double>(bits);
    }
  }
  return values;
}

void write_f64_le(const fs::path& file, std::span<const double> values) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  if constexpr (std::endian::native == std::endian::big) {
    for (const double v : values) {
      const auto bits = __builtin_bswap64(std::bit_cast<std::uint64_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  } else {
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed: " + file.string());
}

json layout_to_json(const SensorLayout& layout) {
  json pos = json::array();
  for (const auto& p : layout.positions) pos.push_back({p.x, p.y});
  return pos;
}

SensorLayout layout_from_json(const json& positions, const std::vector<std::string>& names) {
  SensorLayout layout;
  layout.channel_names = names;
  for (const auto& p : positions) {
    if (!p.is_array() || p.size() != 2) throw DataError("layout entries must be [x, y] pairs");
    layout.positions.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  layout.validate();
  return layout;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

template <class T>
T field(const json& meta, const char* key) {
  if (!meta.contains(key)) throw DataError(std::string("meta.json is missing '") + key + "'");
  try {
    return meta.at(key).get<T>();
  } catch (const json::exception& e) {
    throw DataError(std::string("meta.json field '") + key + "' has the wrong type: " + e.what());
  }
}

}  // namespace

Dataset load_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  const fs::path data_path = dir / "data.bin";
  if (!fs::exists(meta_path)) throw IoError("missing " + meta_path.string());
  if (!fs::exists(data_path)) throw IoError("missing " + data_path.string());
  const json meta = read_json(meta_path);

  const int version = field<int>(meta, "format_version");
  if (version != kFormatVersion) throw DataError("unknown format_version " + std::to_string(version));
  const auto kind = field<std::string>(meta, "kind");
  const auto dims = field<std::vector<std::size_t>>(meta, "dims");
  const auto names = field<std::vector<std::string>>(meta, "channel_names");
  const auto labels = LabelVector::from_names(field<std::vector<std::string>>(meta, "labels"));
  std::optional<SensorLayout> layout;
  if (meta.contains("layout") && !meta.at("layout").is_null()) {
    layout = layout_from_json(meta.at("layout"), names);
  }

  if (kind == "raw") {
    if (dims.size() != 3) throw DataError("raw dataset needs 3 dims");
    auto values = read_f64_le(data_path, dims[0] * dims[1] * dims[2]);
    return TrialSet(dims[0], dims[1], dims[2], std::move(values), field<double>(meta, "sample_rate_hz"),
                    names, labels, std::move(layout));
  }
  if (kind == "tfr") {
    if (dims.size() != 4) throw DataError("tfr dataset needs 4 dims");
    const TfrShape shape{dims[0], dims[1], dims[2], dims[3]};
    auto values = read_f64_le(data_path, shape.size());
    return TFRTensor(shape, std::move(values), field<std::vector<double>>(meta, "freq_axis_hz"),
                     field<std::vector<double>>(meta, "time_axis_s"), names, labels, std::move(layout));
  }
  throw DataError("unknown dataset kind '" + kind + "'");
}

TFRTensor load_tfr(const fs::path& dir) {
  auto ds = load_dataset(dir);
  if (auto* t = std::get_if<TFRTensor>(&ds)) return std::move(*t);
  throw DataError(dir.string() + " holds a raw dataset; a time-frequency dataset is required");
}

void save_dataset(const TrialSet& data, const fs::path& dir) {
  ensure_dir(dir);
  json meta;
  meta["format_version"] = kFormatVersion;
  meta["kind"] = "raw";
  meta["dims"] = {data.trials(), data.channels(), data.samples()};
  meta["channel_names"] = data.channel_names();
  meta["labels"] = data.labels().names();
  meta["sample_rate_hz"] = data.sample_rate();
  if (data.layout()) meta["layout"] = layout_to_json(*data.layout());
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  write_f64_le(dir / "data.bin", data.data());
}

void save_dataset(const TFRTensor& data, const fs::path& dir) {
  ensure_dir(dir);
  const auto& s = data.shape();
  json meta;
  meta["format_version"] = kFormatVersion;
  meta["kind"] = "tfr";
  meta["dims"] = {s.trials, s.channels, s.freqs, s.times};
  meta["channel_names"] = data.channel_names();
  meta["labels"] = data.labels().names();
  meta["freq_axis_hz"] = data.freq_axis();
  meta["time_axis_s"] = data.time_axis();
  if (data.layout()) meta["layout"] = layout_to_json(*data.layout());
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  write_f64_le(dir / "data.bin", data.power());
}

SensorLayout load_layout(const fs::path& file) {
  const json j = read_json(file);
  try {
    return layout_from_json(j.at("positions"), j.at("channel_names").get<std::vector<std::string>>());
  } catch (const json::exception& e) {
    throw DataError("malformed layout file " + file.string() + ": " + e.what());
  }
}

void save_layout(const SensorLayout& layout, const fs::path& file) {
  json j;
  j["channel_names"] = layout.channel_names;
  j["positions"] = layout_to_json(layout);
  write_text(file, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// CSV import

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r\"");
    const auto e = cell.find_last_not_of(" \t\r\"");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t used = 0;
  try {
    out = std::stod(s, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == s.size();
}

struct CsvTable {
  std::vector<std::string> labels;
  std::vector<double> values;
  std::size_t cols{0};
};

CsvTable read_label_csv(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  CsvTable table;
  std::string line;
  bool first = true;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 2) throw DataError("CSV line " + std::to_string(lineno) + " needs a label and values");
    std::vector<double> row;
    bool numeric = true;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      double v = 0.0;
      if (!parse_double(cells[c], v)) {
        numeric = false;
        break;
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (first) {
        first = false;
        continue;  // header
      }
      throw DataError("non-numeric value on CSV line " + std::to_string(lineno));
    }
    first = false;
    if (table.cols == 0) table.cols = row.size();
    if (row.size() != table.cols) throw DataError("ragged CSV at line " + std::to_string(lineno));
    table.labels.push_back(cells[0]);
    table.values.insert(table.values.end(), row.begin(), row.end());
  }
  if (table.labels.empty()) throw DataError("CSV file has no data rows: " + file.string());
  return table;
}

}  // namespace

TrialSet import_csv_raw(const fs::path& file, double sample_rate_hz) {
  auto table = read_label_csv(file);
  const std::size_t trials = table.labels.size();
  return TrialSet(trials, 1, table.cols, std::move(table.values), sample_rate_hz, {"ch1"},
                  LabelVector::from_names(table.labels));
}

TFRTensor import_csv_tfr(const fs::path& file, double time_step_s) {
  if (!(time_step_s > 0.0)) throw std::invalid_argument("time step must be positive");
  auto table = read_label_csv(file);
  const std::size_t trials = table.labels.size();
  std::vector<double> times(table.cols);
  for (std::size_t j = 0; j < table.cols; ++j) times[j] = static_cast<double>(j) * time_step_s;
  return TFRTensor({trials, 1, 1, table.cols}, std::move(table.values), {1.0}, std::move(times), {"ch1"},
                   LabelVector::from_names(table.labels));
}

}  // namespace masstest
