#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "carle/error.hpp"

namespace carle {

/// Multichannel vibration record: every channel holds the same number of
/// samples, taken at a common sampling rate.
class MultiChannelSignal {
public:
  MultiChannelSignal() = default;

  MultiChannelSignal(std::vector<std::vector<double>> channels, double sample_rate_hz)
      : channels_(std::move(channels)), sample_rate_hz_(sample_rate_hz) {
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_))
      throw ParameterError("sample rate must be positive, got " + std::to_string(sample_rate_hz_));
    if (channels_.empty()) throw InputError("signal has no channels");
    const std::size_t n = channels_.front().size();
    if (n == 0) throw InputError("signal channels are empty");
    for (const auto& ch : channels_)
      if (ch.size() != n) throw InputError("signal channels differ in length");
  }

  std::size_t channel_count() const noexcept { return channels_.size(); }
  std::size_t length() const noexcept { return channels_.empty() ? 0 : channels_.front().size(); }
  bool empty() const noexcept { return length() == 0; }
  double sample_rate_hz() const noexcept { return sample_rate_hz_; }
  double sample_period_s() const noexcept { return 1.0 / sample_rate_hz_; }

  std::span<const double> channel(std::size_t c) const { return channels_.at(c); }
  std::span<double> channel(std::size_t c) { return channels_.at(c); }
  const std::vector<std::vector<double>>& channels() const noexcept { return channels_; }

  friend bool operator==(const MultiChannelSignal&, const MultiChannelSignal&) = default;

private:
  std::vector<std::vector<double>> channels_;
  double sample_rate_hz_ = 1.0;
};

/// Discrete Gaussian smoothing kernel truncated at +-4 sigma and renormalized.
struct GaussianKernel {
  double sigma = 1.0;
  std::vector<double> taps;

  std::size_t radius() const noexcept { return taps.size() / 2; }

  static GaussianKernel make(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma))
      throw ParameterError("gaussian sigma must be positive, got " + std::to_string(sigma));
    const auto radius = static_cast<std::size_t>(std::ceil(4.0 * sigma));
    GaussianKernel k{sigma, std::vector<double>(2 * radius + 1)};
    double sum = 0.0;
    for (std::size_t i = 0; i < k.taps.size(); ++i) {
      const double x = static_cast<double>(i) - static_cast<double>(radius);
      k.taps[i] = std::exp(-x * x / (2.0 * sigma * sigma)) / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
      sum += k.taps[i];
    }
    for (double& w : k.taps) w /= sum;
    return k;
  }
};

namespace detail {

// Half-sample symmetric reflection (d c b a | a b c d | d c b a), valid for any offset.
inline std::size_t reflect_index(std::ptrdiff_t i, std::size_t n) {
  const auto period = static_cast<std::ptrdiff_t>(2 * n);
  std::ptrdiff_t m = i % period;
  if (m < 0) m += period;
  if (m >= static_cast<std::ptrdiff_t>(n)) m = period - 1 - m;
  return static_cast<std::size_t>(m);
}

inline double mean_square(const MultiChannelSignal& s) {
  double acc = 0.0;
  for (const auto& ch : s.channels())
    for (double v : ch) acc += v * v;
  return acc / static_cast<double>(s.channel_count() * s.length());
}

}  // namespace detail

inline std::vector<double> convolve_reflect(std::span<const double> x, const GaussianKernel& kernel) {
  const std::size_t n = x.size();
  const auto r = static_cast<std::ptrdiff_t>(kernel.radius());
  std::vector<double> y(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::ptrdiff_t k = -r; k <= r; ++k)
      acc += kernel.taps[static_cast<std::size_t>(k + r)] *
             x[detail::reflect_index(static_cast<std::ptrdiff_t>(i) + k, n)];
    y[i] = acc;
  }
  return y;
}

/// Smooths every channel with a Gaussian of standard deviation `sigma` samples.
inline MultiChannelSignal gaussian_filter(const MultiChannelSignal& signal, double sigma) {
  const auto kernel = GaussianKernel::make(sigma);
  if (signal.empty()) throw InputError("cannot filter an empty signal");
  std::vector<std::vector<double>> out;
  out.reserve(signal.channel_count());
  for (std::size_t c = 0; c < signal.channel_count(); ++c) out.push_back(convolve_reflect(signal.channel(c), kernel));
  return {std::move(out), signal.sample_rate_hz()};
}

struct SnrPoint {
  double sigma = 0.0;
  double snr_db = 0.0;
};

/// SNR of the smoothed signal against the removed residual, for each sigma.
/// Zero residual power (and sigma == 0) reports `cap_db`.
inline std::vector<SnrPoint> snr_sweep(const MultiChannelSignal& signal, std::span<const double> sigmas,
                                       double cap_db = 120.0) {
  if (sigmas.empty()) throw ParameterError("snr sweep needs at least one sigma");
  for (std::size_t i = 0; i < sigmas.size(); ++i) {
    if (sigmas[i] < 0.0 || !std::isfinite(sigmas[i])) throw ParameterError("snr sweep sigmas must be >= 0");
    if (i > 0 && !(sigmas[i] > sigmas[i - 1])) throw ParameterError("snr sweep sigmas must be strictly increasing");
  }
  if (signal.empty()) throw InputError("cannot sweep an empty signal");

  std::vector<SnrPoint> out;
  out.reserve(sigmas.size());
  for (double sigma : sigmas) {
    if (sigma == 0.0) {
      out.push_back({sigma, cap_db});
      continue;
    }
    const auto filtered = gaussian_filter(signal, sigma);
    double p_filtered = 0.0;
    double p_residual = 0.0;
    for (std::size_t c = 0; c < signal.channel_count(); ++c) {
      const auto raw = signal.channel(c);
      const auto smooth = filtered.channel(c);
      for (std::size_t i = 0; i < raw.size(); ++i) {
        p_filtered += smooth[i] * smooth[i];
        const double r = raw[i] - smooth[i];
        p_residual += r * r;
      }
    }
    double snr = cap_db;
    if (p_residual > 0.0 && p_filtered > 0.0) snr = std::min(cap_db, 10.0 * std::log10(p_filtered / p_residual));
    else if (p_residual > 0.0) snr = -cap_db;
    out.push_back({sigma, snr});
  }
  return out;
}

/// A view of `length` consecutive samples of every channel, starting at
/// `start_index`. Borrows from the signal it was cut from.
struct Window {
  std::size_t start_index = 0;
  std::size_t length = 0;
  std::vector<std::span<const double>> samples;

  std::span<const double> channel(std::size_t c) const { return samples.at(c); }
};

inline std::size_t window_count(std::size_t signal_length, std::size_t window_len, std::size_t stride) {
  if (window_len == 0 || stride == 0) throw ParameterError("window length and stride must be positive");
  if (window_len > signal_length)
    throw InputError("window length " + std::to_string(window_len) + " exceeds signal length " +
                     std::to_string(signal_length));
  return (signal_length - window_len) / stride + 1;
}

inline std::vector<Window> extract_windows(const MultiChannelSignal& signal, std::size_t window_len,
                                           std::size_t stride) {
  const std::size_t count = window_count(signal.length(), window_len, stride);
  std::vector<Window> windows;
  windows.reserve(count);
  for (std::size_t w = 0; w < count; ++w) {
    Window win{w * stride, window_len, {}};
    win.samples.reserve(signal.channel_count());
    for (std::size_t c = 0; c < signal.channel_count(); ++c)
      win.samples.push_back(signal.channel(c).subspan(win.start_index, window_len));
    windows.push_back(std::move(win));
  }
  return windows;
}

inline std::vector<Window> extract_windows(const MultiChannelSignal& signal, std::size_t window_len) {
  return extract_windows(signal, window_len, window_len);
}

enum class NoiseKind { gaussian, salt_pepper };

struct NoiseParams {
  double mean = 0.0;
  double std = 0.1;
  double fraction = 0.1;
  double amplitude = 0.5;
};

/// Corrupts a copy of `signal`. Gaussian noise adds N(mean, std^2) per sample;
/// salt-and-pepper replaces round(fraction * L) samples per channel with
/// values (max - min) * amplitude beyond either end of the channel's range.
inline MultiChannelSignal inject_noise(const MultiChannelSignal& signal, NoiseKind kind, const NoiseParams& params,
                                       std::uint64_t seed) {
  if (signal.empty()) throw InputError("cannot corrupt an empty signal");
  std::mt19937_64 rng(seed);
  auto channels = signal.channels();

  if (kind == NoiseKind::gaussian) {
    if (!(params.std >= 0.0) || !std::isfinite(params.mean))
      throw ParameterError("gaussian noise requires std >= 0 and a finite mean");
    if (params.std == 0.0 && params.mean == 0.0) return signal;
    std::normal_distribution<double> normal(params.mean, params.std);
    for (auto& ch : channels)
      for (double& v : ch) v += params.std == 0.0 ? params.mean : normal(rng);
    return {std::move(channels), signal.sample_rate_hz()};
  }

  if (!(params.fraction >= 0.0 && params.fraction <= 1.0))
    throw ParameterError("salt-and-pepper fraction must lie in [0, 1], got " + std::to_string(params.fraction));
  if (!(params.amplitude > 0.0)) throw ParameterError("salt-and-pepper amplitude must be positive");

  const std::size_t n = signal.length();
  const auto count = static_cast<std::size_t>(std::llround(params.fraction * static_cast<double>(n)));
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::bernoulli_distribution coin(0.5);
  for (auto& ch : channels) {
    const auto [lo_it, hi_it] = std::minmax_element(ch.begin(), ch.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    const double range = hi - lo;
    std::vector<std::size_t> picked;
    picked.reserve(count);
    std::sample(all.begin(), all.end(), std::back_inserter(picked), count, rng);
    for (std::size_t i : picked) ch[i] = coin(rng) ? hi + params.amplitude * range : lo - params.amplitude * range;
  }
  return {std::move(channels), signal.sample_rate_hz()};
}

/// Parameters of a synthetic run-to-failure record: shaft harmonics, a
/// localized fault that starts at `onset_fraction` of life and grows at
/// `growth_rate`, plus stationary sensor noise.
struct DegradationProfile {
  double shaft_hz = 35.0;
  double sample_rate_hz = 25000.0;
  double duration_s = 10.0;
  double onset_fraction = 0.5;
  double growth_rate = 1.0;
  std::size_t channel_count = 2;
  double noise_std = 0.2;
  std::vector<double> harmonic_amplitudes{1.0, 0.5, 0.25};
  double fault_order = 3.58;       // impacts per shaft revolution (outer-race-like)
  double resonance_hz = 0.0;       // 0 selects 0.3 * sample rate
  double impact_amplitude = 2.0;   // burst amplitude per unit severity
  double wear_gain = 0.5;          // harmonic growth per unit severity
};

struct RunMetadata {
  double failure_time_s = 0.0;
  double onset_time_s = 0.0;
  std::size_t failure_sample = 0;
  std::size_t impact_count = 0;
};

struct SynthRun {
  MultiChannelSignal signal;
  RunMetadata metadata;
};

inline SynthRun synth_run_to_failure(const DegradationProfile& profile, std::uint64_t seed) {
  if (!(profile.duration_s > 0.0)) throw ParameterError("synthetic duration must be positive");
  if (!(profile.shaft_hz > 0.0)) throw ParameterError("shaft frequency must be positive");
  if (!(profile.sample_rate_hz > 0.0)) throw ParameterError("sample rate must be positive");
  if (profile.channel_count == 0) throw ParameterError("channel count must be positive");
  if (!(profile.onset_fraction >= 0.0 && profile.onset_fraction < 1.0))
    throw ParameterError("fault onset fraction must lie in [0, 1)");
  if (profile.growth_rate < 0.0) throw ParameterError("fault growth rate must be >= 0");
  if (3.0 * profile.shaft_hz >= profile.sample_rate_hz / 2.0)
    throw ParameterError("third shaft harmonic must stay below Nyquist");

  const double fs = profile.sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(profile.duration_s * fs));
  if (n < 2) throw ParameterError("synthetic duration shorter than two samples");
  const double onset_s = profile.onset_fraction * profile.duration_s;
  const double resonance = profile.resonance_hz > 0.0 ? profile.resonance_hz : 0.3 * fs;
  const double decay_s = 6.0 / resonance;
  const double fault_hz = profile.fault_order * profile.shaft_hz;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto severity = [&](double t) {
    if (t <= onset_s) return 0.0;
    return profile.growth_rate * (t - onset_s) / (profile.duration_s - onset_s);
  };

  // Impact schedule shared by all channels: one candidate per fault period,
  // fired with a probability that rises with severity.
  std::vector<std::pair<double, double>> impacts;  // (time, amplitude)
  for (double t = onset_s; t < profile.duration_s; t += 1.0 / fault_hz) {
    const double s = severity(t);
    if (s <= 0.0) continue;
    const double fire = std::min(1.0, 0.25 + 0.75 * s / std::max(profile.growth_rate, 1e-12));
    const double jitter = (unit(rng) - 0.5) * 0.1 / fault_hz;
    const double amp = profile.impact_amplitude * s * (0.75 + 0.5 * unit(rng));
    if (unit(rng) < fire) impacts.emplace_back(t + jitter, amp);
  }

  std::vector<std::vector<double>> channels(profile.channel_count, std::vector<double>(n));
  for (std::size_t c = 0; c < profile.channel_count; ++c) {
    const double gain = 1.0 / (1.0 + 0.25 * static_cast<double>(c));
    std::vector<double> phase(profile.harmonic_amplitudes.size());
    for (double& p : phase) p = 2.0 * std::numbers::pi * unit(rng);
    auto& x = channels[c];
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) / fs;
      const double wear = 1.0 + profile.wear_gain * severity(t);
      double v = 0.0;
      for (std::size_t h = 0; h < profile.harmonic_amplitudes.size(); ++h)
        v += profile.harmonic_amplitudes[h] *
             std::sin(2.0 * std::numbers::pi * static_cast<double>(h + 1) * profile.shaft_hz * t + phase[h]);
      x[i] = gain * wear * v + profile.noise_std * normal(rng);
    }
    for (const auto& [t0, amp] : impacts) {
      const auto first = static_cast<std::size_t>(std::max(0.0, std::ceil(t0 * fs)));
      const auto last = std::min(n, static_cast<std::size_t>(std::ceil((t0 + 8.0 * decay_s) * fs)));
      for (std::size_t i = first; i < last; ++i) {
        const double dt = static_cast<double>(i) / fs - t0;
        x[i] += gain * amp * std::exp(-dt / decay_s) * std::sin(2.0 * std::numbers::pi * resonance * dt);
      }
    }
  }

  RunMetadata meta{profile.duration_s, onset_s, n - 1, impacts.size()};
  return {MultiChannelSignal(std::move(channels), fs), meta};
}

}  // namespace carle
