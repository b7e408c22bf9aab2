#include "masstest/tfr.hpp"

#include "masstest/error.hpp"
#include "masstest/parallel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace masstest {

namespace {

void validate_config(const MorletConfig& cfg, double sample_rate_hz) {
  if (cfg.freq_axis_hz.empty()) throw std::invalid_argument("frequency axis is empty");
  if (cfg.time_axis_s.empty()) throw std::invalid_argument("time axis is empty");
  if (!(cfg.width_lo >= 1.0) || !(cfg.width_hi >= 1.0)) {
    throw std::invalid_argument("wavelet widths must be at least 1 cycle");
  }
  if (!(cfg.support_sigmas > 0.0)) throw std::invalid_argument("support_sigmas must be positive");
  const double nyquist = sample_rate_hz / 2.0;
  for (std::size_t i = 0; i < cfg.freq_axis_hz.size(); ++i) {
    const double f = cfg.freq_axis_hz[i];
    if (!(f > 0.0) || !(f < nyquist)) {
      throw std::invalid_argument("frequency " + std::to_string(f) + " Hz outside (0, Nyquist)");
    }
    if (i > 0 && !(f > cfg.freq_axis_hz[i - 1])) {
      throw std::invalid_argument("frequency axis must be strictly increasing");
    }
  }
}

}  // namespace

double wavelet_width(double freq_hz, const MorletConfig& cfg) {
  if (cfg.freq_axis_hz.empty()) throw std::invalid_argument("frequency axis is empty");
  const double f_min = cfg.freq_axis_hz.front();
  const double f_max = cfg.freq_axis_hz.back();
  if (freq_hz < f_min || freq_hz > f_max) {
    throw std::out_of_range("frequency " + std::to_string(freq_hz) + " Hz outside the analysis range");
  }
  if (f_max == f_min) return cfg.width_lo;
  return cfg.width_lo + (freq_hz - f_min) / (f_max - f_min) * (cfg.width_hi - cfg.width_lo);
}

MorletKernel morlet_kernel(double freq_hz, double cycles, double sample_rate_hz,
                           double support_sigmas) {
  const double sigma_t = cycles / (2.0 * std::numbers::pi * freq_hz);
  const auto half = static_cast<std::size_t>(std::ceil(support_sigmas * sigma_t * sample_rate_hz));
  MorletKernel k;
  k.taps.resize(2 * half + 1);
  double energy = 0.0;
  for (std::size_t i = 0; i < k.taps.size(); ++i) {
    const double tau = (static_cast<double>(i) - static_cast<double>(half)) / sample_rate_hz;
    const double env = std::exp(-tau * tau / (2.0 * sigma_t * sigma_t));
    k.taps[i] = std::polar(env, 2.0 * std::numbers::pi * freq_hz * tau);
    energy += env * env;
  }
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& t : k.taps) t *= scale;
  return k;
}

TFRTensor morlet_power(const TrialSet& data, const MorletConfig& cfg) {
  const double fs = data.sample_rate();
  validate_config(cfg, fs);

  const std::size_t nf = cfg.freq_axis_hz.size();
  const std::size_t nt = cfg.time_axis_s.size();
  std::vector<MorletKernel> kernels;
  kernels.reserve(nf);
  for (const double f : cfg.freq_axis_hz) {
    kernels.push_back(morlet_kernel(f, wavelet_width(f, cfg), fs, cfg.support_sigmas));
  }

  // Sample index of each analysis time, with the edge check done up front.
  std::vector<std::size_t> centers(nt);
  const auto last = static_cast<double>(data.samples() - 1);
  for (std::size_t j = 0; j < nt; ++j) {
    const double pos = std::round(cfg.time_axis_s[j] * fs);
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const auto half = static_cast<double>(kernels[fi].half_length());
      if (pos - half < 0.0 || pos + half > last) {
        std::ostringstream msg;
        msg << "time point " << cfg.time_axis_s[j] << " s is too close to the trial edge for "
            << cfg.freq_axis_hz[fi] << " Hz (needs " << half << " samples each side)";
        throw DataError(msg.str());
      }
    }
    centers[j] = static_cast<std::size_t>(pos);
  }

  const std::size_t trials = data.trials();
  const std::size_t channels = data.channels();
  std::vector<double> power(trials * channels * nf * nt);
  parallel_for(trials * channels, cfg.threads, [&](std::size_t idx) {
    const std::size_t r = idx / channels;
    const std::size_t c = idx % channels;
    const auto x = data.series(r, c);
    double* out = power.data() + idx * nf * nt;
    for (std::size_t fi = 0; fi < nf; ++fi) {
      const auto& taps = kernels[fi].taps;
      const std::size_t half = kernels[fi].half_length();
      for (std::size_t j = 0; j < nt; ++j) {
        const std::size_t start = centers[j] - half;
        double re = 0.0;
        double im = 0.0;
        for (std::size_t k = 0; k < taps.size(); ++k) {
          // correlate with the conjugate kernel
          re += x[start + k] * taps[k].real();
          im -= x[start + k] * taps[k].imag();
        }
        out[fi * nt + j] = re * re + im * im;
      }
    }
  });

  return TFRTensor({trials, channels, nf, nt}, std::move(power), cfg.freq_axis_hz, cfg.time_axis_s,
                   data.channel_names(), data.labels(), data.layout());
}

}  // namespace masstest
