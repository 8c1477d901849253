#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "carle/csv.hpp"
#include "carle/cwt.hpp"
#include "carle/error.hpp"
#include "carle/signal.hpp"

namespace carle {

struct ScaleEnergy {
  std::vector<double> per_scale;
  double total = 0.0;
};

/// Sum of |G(a, b)|^2 over time shifts, per scale and overall.
inline ScaleEnergy energy(const Scalogram& scalogram) {
  if (scalogram.rows == 0 || scalogram.cols == 0) throw InputError("energy of an empty scalogram");
  ScaleEnergy e{std::vector<double>(scalogram.rows, 0.0), 0.0};
  for (std::size_t s = 0; s < scalogram.rows; ++s) {
    double acc = 0.0;
    for (std::size_t b = 0; b < scalogram.cols; ++b) acc += std::norm(scalogram(s, b));
    e.per_scale[s] = acc;
    e.total += acc;
  }
  return e;
}

/// Frequency (Hz) of the most energetic scale; ties go to the smaller scale.
inline double dominant_frequency(std::span<const double> scale_energies, const ScaleGrid& grid) {
  if (scale_energies.size() != grid.count()) throw InputError("scale energies do not match the scale grid");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scale_energies.size(); ++i)
    if (scale_energies[i] > scale_energies[best]) best = i;
  if (!(scale_energies[best] > 0.0)) throw DegenerateWindowError("all scale energies are zero");
  return grid.frequency_of(grid.scales[best]);
}

/// Shannon entropy (nats) of the normalized per-scale energy distribution.
inline double entropy(std::span<const double> scale_energies) {
  double total = 0.0;
  for (double e : scale_energies) total += e;
  if (!(total > 0.0)) throw DegenerateWindowError("entropy of zero total energy");
  double h = 0.0;
  for (double e : scale_energies) {
    if (e <= 0.0) continue;
    const double p = e / total;
    h -= p * std::log(p);
  }
  return h < 0.0 ? 0.0 : h;
}

struct Moments {
  double mean = 0.0;
  double std = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;  // Pearson (Gaussian = 3)
};

inline Moments moments(std::span<const double> x) {
  if (x.size() < 4) throw InputError("moments need at least 4 samples");
  const auto n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0;
  double m3 = 0.0;
  double m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  // relative threshold: a constant window leaves only rounding in m2
  if (!(m2 > 1e-28 * (mean * mean + 1e-300))) throw DegenerateWindowError("zero variance window");
  const double sd = std::sqrt(m2);
  return {mean, sd, m3 / (m2 * sd), m4 / (m2 * m2)};
}

inline constexpr std::array<std::string_view, 7> kFeatureNames{"log_energy", "dominant_freq", "entropy", "kurtosis",
                                                                "skewness",   "mean",          "std"};

struct TfrFeatures {
  double log_energy = 0.0;
  double dominant_freq_hz = 0.0;
  double entropy = 0.0;
  double kurtosis = 0.0;
  double skewness = 0.0;
  double mean = 0.0;
  double std = 0.0;

  std::array<double, 7> values() const {
    return {log_energy, dominant_freq_hz, entropy, kurtosis, skewness, mean, std};
  }
};

struct ExtractionConfig {
  double sigma_g = 0.75;
  std::size_t window_len = 1024;
  std::size_t stride = 0;  // 0 = window_len
  double shaft_hz = 35.0;
  std::size_t n_scales = 64;
  double center_freq = 0.81;
  MorletPhase phase = MorletPhase::cycles;
  bool skip_degenerate = true;

  std::size_t effective_stride() const { return stride == 0 ? window_len : stride; }
};

/// The seven time-frequency features of one channel of one window.
inline TfrFeatures window_features(std::span<const double> samples, const ScaleGrid& grid, MorletPhase phase) {
  const auto scalogram = transform(samples, grid, {phase});
  const auto e = energy(scalogram);
  if (!(e.total > 0.0)) throw DegenerateWindowError("zero wavelet energy");
  const auto m = moments(samples);
  return {std::log(e.total), dominant_frequency(e.per_scale, grid), entropy(e.per_scale), m.kurtosis, m.skewness,
          m.mean, m.std};
}

struct FeatureVector {
  std::size_t window_index = 0;
  std::vector<double> values;
};

/// Feature rows of one recording, sensors outer and the 7 features inner.
struct FeatureSet {
  std::vector<std::string> names;
  std::vector<FeatureVector> vectors;
  std::size_t total_windows = 0;  // windows cut, including skipped degenerate ones

  std::size_t width() const noexcept { return names.size(); }
  std::size_t size() const noexcept { return vectors.size(); }
};

inline std::vector<std::string> feature_names(std::size_t channel_count) {
  std::vector<std::string> names;
  names.reserve(7 * channel_count);
  for (std::size_t c = 0; c < channel_count; ++c)
    for (auto f : kFeatureNames) names.push_back("ch" + std::to_string(c + 1) + "." + std::string(f));
  return names;
}

using WarningSink = std::function<void(const std::string&)>;

inline void stderr_warning(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

/// Gaussian filter, windowing, per-channel CWT and the seven features,
/// concatenated across channels for every window.
inline FeatureSet extract_features(const MultiChannelSignal& signal, const ExtractionConfig& config,
                                   const WarningSink& warn = stderr_warning) {
  if (signal.empty()) throw InputError("cannot extract features from an empty signal");
  const auto grid = build_scale_grid(config.shaft_hz, signal.sample_rate_hz(), config.n_scales, config.center_freq);
  const auto filtered = gaussian_filter(signal, config.sigma_g);
  const auto windows = extract_windows(filtered, config.window_len, config.effective_stride());

  FeatureSet out{feature_names(signal.channel_count()), {}, windows.size()};
  out.vectors.reserve(windows.size());
  for (std::size_t w = 0; w < windows.size(); ++w) {
    FeatureVector fv{w, {}};
    fv.values.reserve(out.width());
    try {
      for (std::size_t c = 0; c < signal.channel_count(); ++c) {
        const auto f = window_features(windows[w].channel(c), grid, config.phase).values();
        fv.values.insert(fv.values.end(), f.begin(), f.end());
      }
    } catch (const DegenerateWindowError& e) {
      if (!config.skip_degenerate) throw DegenerateWindowError(e.what(), static_cast<std::ptrdiff_t>(w));
      if (warn) warn("skipping degenerate window " + std::to_string(w) + ": " + e.what());
      continue;
    }
    out.vectors.push_back(std::move(fv));
  }
  return out;
}

namespace csv {

/// Feature matrix export: `run,window_index,<names...>`, one row per window.
inline Table from_features(const FeatureSet& features, std::size_t run = 0) {
  Table t;
  t.header = {"run", "window_index"};
  t.header.insert(t.header.end(), features.names.begin(), features.names.end());
  t.comments.push_back("total_windows=" + std::to_string(features.total_windows));
  for (const auto& fv : features.vectors) {
    std::vector<double> row{static_cast<double>(run), static_cast<double>(fv.window_index)};
    row.insert(row.end(), fv.values.begin(), fv.values.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace csv

}  // namespace carle
