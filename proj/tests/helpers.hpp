#pragma once

#include "masstest/core_data.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testutil {

inline std::vector<std::string> channel_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < n; ++c) out.push_back("E" + std::to_string(c));
  return out;
}

inline std::vector<double> axis(std::size_t n, double start, double step) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = start + step * double(i);
  return out;
}

inline masstest::LabelVector balanced_labels(std::size_t trials) {
  std::vector<int> codes(trials);
  for (std::size_t i = 0; i < trials; ++i) codes[i] = i < trials / 2 ? 0 : 1;
  return masstest::LabelVector::from_codes(codes, {"a", "b"});
}

// |N(0,1)| + 1 power; label-1 trials get `shift` added on the cells for which
// effect(c, f, t) is true.
template <class Effect>
masstest::TFRTensor random_tensor(masstest::TfrShape s, std::uint64_t seed, double shift, Effect effect) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  const auto labels = balanced_labels(s.trials);
  std::vector<double> power(s.size());
  std::size_t i = 0;
  for (std::size_t r = 0; r < s.trials; ++r) {
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t f = 0; f < s.freqs; ++f) {
        for (std::size_t t = 0; t < s.times; ++t) {
          double v = 1.0 + std::abs(n(rng));
          if (labels[r] == 1 && effect(c, f, t)) v += shift;
          power[i++] = v;
        }
      }
    }
  }
  return masstest::TFRTensor(s, std::move(power), axis(s.freqs, 1.0, 1.0), axis(s.times, 0.0, 0.05),
                             channel_names(s.channels), labels);
}

inline masstest::TFRTensor random_tensor(masstest::TfrShape s, std::uint64_t seed) {
  return random_tensor(s, seed, 0.0, [](std::size_t, std::size_t, std::size_t) { return false; });
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("masstest_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
