#pragma once

#include "masstest/core_data.hpp"

#include <complex>
#include <vector>

namespace masstest {

struct MorletConfig {
  std::vector<double> freq_axis_hz;  // analysis frequencies, strictly increasing
  std::vector<double> time_axis_s;   // analysis times, seconds from the first sample
  double width_lo{4.0};              // cycles at the lowest frequency
  double width_hi{8.0};              // cycles at the highest frequency
  // Wavelet support is truncated at +/- support_sigmas * sigma_t.
  double support_sigmas{3.0};
  int threads{1};
};

// Cycles at frequency f: linear from width_lo at min(freq) to width_hi at
// max(freq). Throws std::out_of_range when f lies outside the axis range.
double wavelet_width(double freq_hz, const MorletConfig& cfg);

// Complex Morlet kernel sampled at `sample_rate_hz`: exp(i 2 pi f tau) times a
// Gaussian with sigma_t = cycles / (2 pi f), truncated at the configured
// support and scaled to unit discrete L2 norm. Index half_length() is tau = 0.
struct MorletKernel {
  std::vector<std::complex<double>> taps;
  std::size_t half_length() const { return taps.size() / 2; }
};
MorletKernel morlet_kernel(double freq_hz, double cycles, double sample_rate_hz,
                           double support_sigmas);

// Power |(x * psi)(t)|^2 at each requested (freq, time). The kernel is applied
// directly at each analysis time (no full-rate transform). Throws DataError
// when a time point is closer to a trial edge than the kernel half-length, and
// std::invalid_argument for an invalid configuration.
TFRTensor morlet_power(const TrialSet& data, const MorletConfig& cfg);

}  // namespace masstest
