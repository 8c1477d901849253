#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "carle/error.hpp"

namespace carle {

/// Logarithmically spaced Morlet scales (in samples) covering
/// [shaft/3, 3 * shaft] Hz. Scale a maps to f = f_c / (a * T_sampling).
struct ScaleGrid {
  std::vector<double> scales;
  double center_freq = 0.81;
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;
  double sample_rate_hz = 1.0;

  std::size_t count() const noexcept { return scales.size(); }
  double frequency_of(double scale) const { return center_freq * sample_rate_hz / scale; }
  double scale_of(double frequency_hz) const { return center_freq * sample_rate_hz / frequency_hz; }
};

inline ScaleGrid build_scale_grid(double shaft_hz, double sample_rate_hz, std::size_t n_scales = 64,
                                  double center_freq = 0.81) {
  if (!(shaft_hz > 0.0)) throw ParameterError("operating frequency f_o must be positive");
  if (!(sample_rate_hz > 0.0)) throw ParameterError("sample rate must be positive");
  if (n_scales < 2) throw ParameterError("scale grid needs at least two scales");
  if (!(center_freq > 0.0)) throw ParameterError("wavelet center frequency must be positive");

  ScaleGrid grid;
  grid.center_freq = center_freq;
  grid.sample_rate_hz = sample_rate_hz;
  grid.f_min_hz = shaft_hz / 3.0;
  grid.f_max_hz = 3.0 * shaft_hz;
  if (grid.f_max_hz >= sample_rate_hz / 2.0)
    throw ParameterError("f_max = 3*f_o = " + std::to_string(grid.f_max_hz) + " Hz must stay below Nyquist " +
                         std::to_string(sample_rate_hz / 2.0) + " Hz");

  const double a_min = center_freq * sample_rate_hz / grid.f_max_hz;
  const double a_max = center_freq * sample_rate_hz / grid.f_min_hz;
  const double log_step = std::log(a_max / a_min) / static_cast<double>(n_scales - 1);
  grid.scales.resize(n_scales);
  for (std::size_t i = 0; i < n_scales; ++i) grid.scales[i] = a_min * std::exp(log_step * static_cast<double>(i));
  grid.scales.front() = a_min;
  grid.scales.back() = a_max;
  return grid;
}

/// Placement of the Morlet carrier. `cycles` uses exp(i 2 pi f_c t), which
/// makes scale a peak at f_c / (a T). `literal` uses exp(i f_c t / (2 pi)).
enum class MorletPhase { cycles, literal };

inline double morlet_angular_frequency(double center_freq, MorletPhase phase) {
  return phase == MorletPhase::cycles ? 2.0 * std::numbers::pi * center_freq
                                      : center_freq / (2.0 * std::numbers::pi);
}

inline std::complex<double> morlet(double t, double center_freq, MorletPhase phase = MorletPhase::cycles) {
  const double envelope = std::exp(-0.5 * t * t);
  return std::polar(envelope, morlet_angular_frequency(center_freq, phase) * t);
}

/// Wavelet coefficients of one window: rows are scales, columns time shifts.
struct Scalogram {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::complex<double>> coefficients;  // row-major
  ScaleGrid grid;

  const std::complex<double>& operator()(std::size_t scale, std::size_t shift) const {
    return coefficients[scale * cols + shift];
  }
  std::complex<double>& operator()(std::size_t scale, std::size_t shift) { return coefficients[scale * cols + shift]; }
};

struct TransformOptions {
  MorletPhase phase = MorletPhase::cycles;
  double envelope_cutoff = 1e-8;
};

/// Direct-summation CWT with L2 (1/sqrt(a)) normalization:
///   G(a, b) = dt / sqrt(a) * sum_t x(t) conj(psi((t - b) / a)).
/// Samples outside the window are zero; the wavelet is truncated where its
/// envelope falls below `envelope_cutoff`.
inline Scalogram transform(std::span<const double> window, const ScaleGrid& grid, const TransformOptions& options = {}) {
  if (window.size() < 4) throw InputError("CWT window must hold at least 4 samples");
  if (grid.count() < 2) throw ParameterError("CWT needs a scale grid with at least two scales");

  const std::size_t n = window.size();
  Scalogram out{grid.count(), n, std::vector<std::complex<double>>(grid.count() * n), grid};
  const double dt = 1.0 / grid.sample_rate_hz;
  const double omega = morlet_angular_frequency(grid.center_freq, options.phase);
  const double cutoff = std::sqrt(-2.0 * std::log(options.envelope_cutoff));

  std::vector<double> re;
  std::vector<double> im;
  for (std::size_t s = 0; s < grid.count(); ++s) {
    const double a = grid.scales[s];
    const auto support = static_cast<std::ptrdiff_t>(std::min<double>(static_cast<double>(n - 1), std::floor(a * cutoff)));
    // conj(psi(k / a)) for k in [-support, support], scaled by dt / sqrt(a)
    const double norm = dt / std::sqrt(a);
    re.assign(static_cast<std::size_t>(2 * support + 1), 0.0);
    im.assign(re.size(), 0.0);
    for (std::ptrdiff_t k = -support; k <= support; ++k) {
      const double u = static_cast<double>(k) / a;
      const double env = norm * std::exp(-0.5 * u * u);
      re[static_cast<std::size_t>(k + support)] = env * std::cos(omega * u);
      im[static_cast<std::size_t>(k + support)] = -env * std::sin(omega * u);
    }
    for (std::size_t b = 0; b < n; ++b) {
      const auto bi = static_cast<std::ptrdiff_t>(b);
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, bi - support);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(n) - 1, bi + support);
      const double* wr = re.data() + (lo - bi + support);
      const double* wi = im.data() + (lo - bi + support);
      const double* x = window.data() + lo;
      double acc_re = 0.0;
      double acc_im = 0.0;
      for (std::ptrdiff_t i = 0; i <= hi - lo; ++i) {
        acc_re += x[i] * wr[i];
        acc_im += x[i] * wi[i];
      }
      out(s, b) = {acc_re, acc_im};
    }
  }
  return out;
}

}  // namespace carle
