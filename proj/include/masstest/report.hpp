#pragma once

#include "masstest/cluster.hpp"
#include "masstest/core_data.hpp"
#include "masstest/mcp.hpp"
#include "masstest/pipeline.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace masstest {

inline constexpr const char* kVersion = "0.1.0";

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t state = 0xcbf29ce484222325ULL);
// Hash over shape, axes, channel names, labels and the power payload.
std::string dataset_hash(const TFRTensor& tensor);
std::string dataset_hash(const TrialSet& data);
std::string file_hash(const std::filesystem::path& file);

nlohmann::json to_json(const PipelineConfig& cfg);
nlohmann::json to_json(const RejectionResult& r);
// SignificanceSets, per-step tests (scores, t, p, significance), stop stage,
// warnings and config. Timings are left out so equal inputs give equal JSON.
nlohmann::json to_json(const PipelineReport& report, const TFRTensor& tensor);
nlohmann::json to_json(const ClusterTestConfig& cfg);
nlohmann::json to_json(const ClusterTestResult& result, const TFRTensor& tensor, const ClusterTestConfig& cfg);

// One row per executed test: step,channel,channel_name,freq_hz,time_s,...
std::string pipeline_tests_csv(const PipelineReport& report, const TFRTensor& tensor);
// One row per variable: channel,channel_name,freq_hz,time_s,t,p,cluster.
std::string cluster_pvalues_csv(const ClusterTestResult& result, const TFRTensor& tensor);

struct FrequencyBand {
  std::string name;
  double lo_hz{0.0};
  double hi_hz{0.0};  // inclusive
};

// theta 4-7, alpha 8-12, beta 13-30, gamma 31-45 Hz.
std::vector<FrequencyBand> default_bands();

struct TopomapOptions {
  std::vector<FrequencyBand> bands = default_bands();
  std::size_t window_bins{5};  // time bins per panel column
};

struct TopomapPanel {
  std::string band;
  std::size_t window{0};
  double t0_s{0.0}, t1_s{0.0};
  std::vector<bool> highlighted;  // per channel
};

struct Topomap {
  std::vector<TopomapPanel> panels;  // band-major
  std::string csv;                   // one row per significant triple
  std::string svg;
};

// Panels for every band overlapping the frequency axis, plus an "other" band
// when some analysis frequency lies outside all bands. A channel is
// highlighted in a panel when any significant triple of that channel falls in
// the panel's band and time window. Throws DataError when the layout lacks a
// channel of the tensor.
Topomap build_topomap(const std::vector<VariableIndex>& significant, const TFRTensor& tensor,
                      const SensorLayout& layout, const TopomapOptions& options = {});

// Writes `text` to `file`, creating parent directories. Throws IoError.
void write_text(const std::filesystem::path& file, const std::string& text);
std::string read_text(const std::filesystem::path& file);

}  // namespace masstest
