#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace masstest {

// Binary condition assignment, one entry per trial. Condition names are kept
// as strings and coded 0/1 by lexicographic order of the two names.
class LabelVector {
 public:
  LabelVector() = default;

  // Throws DataError unless exactly two distinct names are present.
  static LabelVector from_names(const std::vector<std::string>& names);
  // Codes must be 0/1 with both present.
  static LabelVector from_codes(std::vector<int> codes,
                                std::array<std::string, 2> class_names = {"0", "1"});

  std::size_t size() const { return codes_.size(); }
  int operator[](std::size_t i) const { return codes_[i]; }
  std::span<const int> codes() const { return codes_; }
  const std::array<std::string, 2>& class_names() const { return class_names_; }
  std::vector<std::string> names() const;
  std::size_t count(int code) const;

  // result[i] = this[order[i]]
  LabelVector permuted(std::span<const std::size_t> order) const;

  bool operator==(const LabelVector&) const = default;

 private:
  std::vector<int> codes_;
  std::array<std::string, 2> class_names_{};
};

struct Vec2 {
  double x{0.0};
  double y{0.0};
  bool operator==(const Vec2&) const = default;
};

struct SensorLayout {
  std::vector<std::string> channel_names;
  std::vector<Vec2> positions;  // one per name, unitless layout plane

  // Throws DataError on duplicate names, size mismatch or non-finite positions.
  void validate() const;
  // Position of a channel by name; std::nullopt when absent.
  std::optional<Vec2> position_of(const std::string& name) const;
  bool operator==(const SensorLayout&) const = default;
};

// Raw time series, trials x channels x samples.
class TrialSet {
 public:
  TrialSet(std::size_t trials, std::size_t channels, std::size_t samples,
           std::vector<double> data, double sample_rate_hz,
           std::vector<std::string> channel_names, LabelVector labels,
           std::optional<SensorLayout> layout = std::nullopt);

  std::size_t trials() const { return trials_; }
  std::size_t channels() const { return channels_; }
  std::size_t samples() const { return samples_; }
  double sample_rate() const { return sample_rate_; }
  const std::vector<std::string>& channel_names() const { return channel_names_; }
  const LabelVector& labels() const { return labels_; }
  const std::optional<SensorLayout>& layout() const { return layout_; }
  std::span<const double> data() const { return *data_; }
  // Contiguous samples of one (trial, channel).
  std::span<const double> series(std::size_t trial, std::size_t channel) const;

 private:
  std::size_t trials_, channels_, samples_;
  std::shared_ptr<const std::vector<double>> data_;
  double sample_rate_;
  std::vector<std::string> channel_names_;
  LabelVector labels_;
  std::optional<SensorLayout> layout_;
};

struct TfrShape {
  std::size_t trials{0};
  std::size_t channels{0};
  std::size_t freqs{0};
  std::size_t times{0};

  std::size_t size() const { return trials * channels * freqs * times; }
  std::size_t variables() const { return channels * freqs * times; }
  bool operator==(const TfrShape&) const = default;
};

// Time-frequency power, trials x channels x freqs x times, row-major.
// Immutable; the power buffer is shared between copies so relabelling a
// tensor (with_labels) is cheap.
class TFRTensor {
 public:
  TFRTensor(TfrShape shape, std::vector<double> power, std::vector<double> freq_axis_hz,
            std::vector<double> time_axis_s, std::vector<std::string> channel_names,
            LabelVector labels, std::optional<SensorLayout> layout = std::nullopt);

  const TfrShape& shape() const { return shape_; }
  std::span<const double> power() const { return *power_; }
  double at(std::size_t trial, std::size_t channel, std::size_t freq, std::size_t time) const {
    return (*power_)[((trial * shape_.channels + channel) * shape_.freqs + freq) * shape_.times + time];
  }
  // freqs x times block of one (trial, channel).
  std::span<const double> slab(std::size_t trial, std::size_t channel) const;
  // channels x freqs x times block of one trial (the per-trial variable vector).
  std::span<const double> trial(std::size_t trial) const;

  const std::vector<double>& freq_axis() const { return freq_axis_; }
  const std::vector<double>& time_axis() const { return time_axis_; }
  const std::vector<std::string>& channel_names() const { return channel_names_; }
  const LabelVector& labels() const { return labels_; }
  const std::optional<SensorLayout>& layout() const { return layout_; }

  TFRTensor with_labels(LabelVector labels) const;
  TFRTensor with_layout(std::optional<SensorLayout> layout) const;

 private:
  TfrShape shape_;
  std::shared_ptr<const std::vector<double>> power_;
  std::vector<double> freq_axis_;
  std::vector<double> time_axis_;
  std::vector<std::string> channel_names_;
  LabelVector labels_;
  std::optional<SensorLayout> layout_;
};

// Position of one variable in the channels x freqs x times grid.
struct VariableIndex {
  std::size_t channel{0};
  std::size_t freq{0};
  std::size_t time{0};
  auto operator<=>(const VariableIndex&) const = default;
};

// Flat row-major index of a variable within one trial's block and back.
inline std::size_t flat_index(const TfrShape& s, const VariableIndex& v) {
  return (v.channel * s.freqs + v.freq) * s.times + v.time;
}
inline VariableIndex variable_at(const TfrShape& s, std::size_t flat) {
  return {flat / (s.freqs * s.times), (flat / s.times) % s.freqs, flat % s.times};
}

// Per-trial stack of one channel's freqs x times block.
struct ChannelSlab {
  std::size_t trials{0};
  std::size_t freqs{0};
  std::size_t times{0};
  std::vector<double> values;

  std::span<const double> trial(std::size_t r) const {
    return std::span<const double>(values).subspan(r * freqs * times, freqs * times);
  }
};

// Channel index is zero-based; throws std::out_of_range when >= channels.
ChannelSlab slice_channel(const TFRTensor& tensor, std::size_t channel);

using Dataset = std::variant<TrialSet, TFRTensor>;

inline constexpr int kFormatVersion = 1;

// Reads <dir>/meta.json and <dir>/data.bin. Throws IoError for missing or
// unreadable files and DataError for malformed or inconsistent content.
Dataset load_dataset(const std::filesystem::path& dir);
// Convenience wrapper that rejects raw datasets.
TFRTensor load_tfr(const std::filesystem::path& dir);

// Creates the directory if needed; throws IoError on failure.
void save_dataset(const TrialSet& data, const std::filesystem::path& dir);
void save_dataset(const TFRTensor& data, const std::filesystem::path& dir);

// Layout file: {"channel_names": [...], "positions": [[x, y], ...]}.
SensorLayout load_layout(const std::filesystem::path& file);
void save_layout(const SensorLayout& layout, const std::filesystem::path& file);

// CSV import for two-dimensional toy data: one row per trial, first column the
// condition label, remaining columns the values. A non-numeric first row is
// treated as a header. Raw import yields one channel with the given sample
// rate; TFR import yields one channel and one frequency bin (1 Hz) with the
// columns as time bins spaced `time_step_s` apart.
TrialSet import_csv_raw(const std::filesystem::path& file, double sample_rate_hz);
TFRTensor import_csv_tfr(const std::filesystem::path& file, double time_step_s);

}  // namespace masstest
