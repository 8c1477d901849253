#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "carle/signal.hpp"

namespace carle {
namespace {

MultiChannelSignal mono(std::vector<double> x, double fs = 1000.0) { return MultiChannelSignal({std::move(x)}, fs); }

std::vector<double> random_series(std::size_t n, std::uint64_t seed, double mean = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(mean, 1.0);
  std::vector<double> x(n);
  for (double& v : x) v = d(rng);
  return x;
}

double variance(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double acc = 0.0;
  for (double v : x) acc += (v - m) * (v - m);
  return acc / static_cast<double>(x.size());
}

TEST(MultiChannelSignal, RejectsRaggedChannels) {
  EXPECT_THROW(MultiChannelSignal({{1, 2, 3}, {1, 2}}, 10.0), InputError);
  EXPECT_THROW(MultiChannelSignal({{1, 2, 3}}, 0.0), ParameterError);
  EXPECT_THROW(MultiChannelSignal({}, 10.0), InputError);
  EXPECT_THROW(MultiChannelSignal({{}}, 10.0), InputError);
}

TEST(GaussianKernel, TapsSumToOneAndAreSymmetric) {
  for (double sigma = 0.1; sigma <= 10.0; sigma += 0.35) {
    const auto k = GaussianKernel::make(sigma);
    double sum = 0.0;
    for (double w : k.taps) sum += w;
    EXPECT_NEAR(sum, 1.0, 1e-9) << sigma;
    ASSERT_EQ(k.taps.size() % 2, 1u);
    for (std::size_t i = 0; i < k.taps.size(); ++i) EXPECT_EQ(k.taps[i], k.taps[k.taps.size() - 1 - i]);
  }
  EXPECT_THROW(GaussianKernel::make(0.0), ParameterError);
  EXPECT_THROW(GaussianKernel::make(-1.0), ParameterError);
}

TEST(GaussianFilter, MatchesReferenceFilter) {
  // scipy.ndimage.gaussian_filter1d(x, sigma, mode="reflect", truncate=4.0)
  const std::vector<double> x{0, 1, 4, 2, -1, 3, 0, 5};
  const std::vector<double> s1{0.5386520831049251, 1.4757483211962126, 2.2811265024581973, 1.740434938487889,
                               1.0541385914529848, 1.3728174395615198, 2.161536612547989,  3.375545511190283};
  const std::vector<double> s075{0.2957152826724301, 1.4369904638753117, 2.768991680124624,  1.7806125928017726,
                                 0.6233083557892747, 1.4850138373019461, 1.8105230103183696, 3.7988447771162708};
  const auto y1 = gaussian_filter(mono(x), 1.0);
  const auto y075 = gaussian_filter(mono(x), 0.75);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(y1.channel(0)[i], s1[i], 1e-12);
    EXPECT_NEAR(y075.channel(0)[i], s075[i], 1e-12);
  }
}

TEST(GaussianFilter, ConstantSignalIsUnchanged) {
  for (double sigma : {0.3, 1.0, 4.0}) {
    const auto y = gaussian_filter(mono(std::vector<double>(50, 2.5)), sigma);
    for (double v : y.channel(0)) EXPECT_NEAR(v, 2.5, 1e-12);
  }
}

TEST(GaussianFilter, ImpulseReproducesTaps) {
  std::vector<double> x(41, 0.0);
  x[20] = 1.0;
  const auto y = gaussian_filter(mono(x), 1.0);
  const auto k = GaussianKernel::make(1.0);
  EXPECT_NEAR(y.channel(0)[20], 1.0 / std::sqrt(2.0 * std::numbers::pi), 5e-5);
  for (std::size_t i = 0; i < k.taps.size(); ++i) EXPECT_DOUBLE_EQ(y.channel(0)[20 - k.radius() + i], k.taps[i]);
}

TEST(GaussianFilter, ReducesWhiteNoiseVariance) {
  const auto x = random_series(5000, 3);
  const auto y = gaussian_filter(mono(x), 2.0);
  EXPECT_LT(variance({y.channel(0).begin(), y.channel(0).end()}), variance(x));
}

TEST(GaussianFilter, IsLinear) {
  const auto x = random_series(300, 11);
  const auto z = random_series(300, 12);
  const double a = 1.7;
  const double b = -0.4;
  std::vector<double> mix(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) mix[i] = a * x[i] + b * z[i];
  const auto fx = gaussian_filter(mono(x), 1.3);
  const auto fz = gaussian_filter(mono(z), 1.3);
  const auto fm = gaussian_filter(mono(mix), 1.3);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double expect = a * fx.channel(0)[i] + b * fz.channel(0)[i];
    EXPECT_NEAR(fm.channel(0)[i], expect, 1e-9 * std::max(1.0, std::abs(expect)));
  }
}

TEST(GaussianFilter, NeverIncreasesPowerOfZeroMeanSignals) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto x = random_series(128, 100 + seed);
    double m = 0.0;
    for (double v : x) m += v;
    m /= static_cast<double>(x.size());
    for (double& v : x) v -= m;
    const double sigma = 0.25 + static_cast<double>(seed % 8) * 0.5;
    const auto y = gaussian_filter(mono(x), sigma);
    double px = 0.0;
    double py = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      px += x[i] * x[i];
      py += y.channel(0)[i] * y.channel(0)[i];
    }
    EXPECT_LE(py, px * (1.0 + 1e-12)) << seed;
  }
}

TEST(GaussianFilter, FiltersEveryChannel) {
  MultiChannelSignal s({{0, 0, 1, 0, 0}, {3, 3, 3, 3, 3}}, 100.0);
  const auto y = gaussian_filter(s, 0.8);
  EXPECT_EQ(y.channel_count(), 2u);
  EXPECT_GT(y.channel(0)[1], 0.0);
  for (double v : y.channel(1)) EXPECT_NEAR(v, 3.0, 1e-12);
}

TEST(SnrSweep, ConstantSignalHitsCap) {
  const std::vector<double> sigmas{0.5, 1.0, 2.0};
  for (const auto& p : snr_sweep(mono(std::vector<double>(64, 1.0)), sigmas)) EXPECT_DOUBLE_EQ(p.snr_db, 120.0);
}

TEST(SnrSweep, NoisySinusoidDeclinesWithSigma) {
  const std::size_t n = 4000;
  std::vector<double> x(n);
  const auto noise = random_series(n, 5);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = std::sin(2.0 * std::numbers::pi * 35.0 * static_cast<double>(i) / 2000.0) + 0.3 * noise[i];
  const std::vector<double> sigmas{0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
  const auto curve = snr_sweep(mono(x, 2000.0), sigmas);
  ASSERT_EQ(curve.size(), sigmas.size());
  for (std::size_t i = 2; i < curve.size(); ++i) EXPECT_LE(curve[i].snr_db, curve[i - 1].snr_db);
  EXPECT_GT(curve.front().snr_db, curve.back().snr_db);
}

TEST(SnrSweep, RejectsBadSigmaLists) {
  const auto s = mono({1, 2, 3, 4});
  EXPECT_THROW(snr_sweep(s, std::vector<double>{}), ParameterError);
  EXPECT_THROW(snr_sweep(s, std::vector<double>{1.0, 1.0}), ParameterError);
  EXPECT_THROW(snr_sweep(s, std::vector<double>{-1.0}), ParameterError);
}

TEST(Windows, CountExamples) {
  EXPECT_EQ(window_count(100, 25, 25), 4u);
  EXPECT_EQ(window_count(100, 30, 30), 3u);
  EXPECT_EQ(window_count(100, 25, 10), 8u);
  EXPECT_THROW(window_count(10, 20, 5), InputError);
  EXPECT_THROW(window_count(10, 0, 5), ParameterError);
}

TEST(Windows, CountFormulaAndBounds) {
  std::vector<double> x(137);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  const auto s = mono(x);
  for (std::size_t len = 1; len <= 137; len += 9)
    for (std::size_t stride = 1; stride <= 40; stride += 7) {
      const auto w = extract_windows(s, len, stride);
      ASSERT_EQ(w.size(), (137 - len) / stride + 1);
      for (const auto& win : w) {
        EXPECT_LE(win.start_index + win.length, 137u);
        EXPECT_EQ(win.channel(0).front(), static_cast<double>(win.start_index));
      }
    }
}

TEST(Noise, ZeroStdGaussianIsIdentity) {
  const auto s = mono(random_series(100, 1));
  EXPECT_EQ(inject_noise(s, NoiseKind::gaussian, {0.0, 0.0, 0.1, 0.5}, 4), s);
}

TEST(Noise, GaussianVarianceAdds) {
  const auto s = mono(random_series(100000, 21));
  const auto y = inject_noise(s, NoiseKind::gaussian, {0.0, 0.1, 0.0, 0.5}, 22);
  const auto v = variance({y.channel(0).begin(), y.channel(0).end()});
  EXPECT_NEAR(v / variance({s.channel(0).begin(), s.channel(0).end()}), 1.01, 0.005);
}

TEST(Noise, SaltPepperReplacesExactCount) {
  const auto s = mono(random_series(10000, 8));
  const auto y = inject_noise(s, NoiseKind::salt_pepper, {0.0, 0.0, 0.1, 0.5}, 9);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < s.length(); ++i) changed += s.channel(0)[i] != y.channel(0)[i];
  EXPECT_EQ(changed, 1000u);
}

TEST(Noise, SeededAndReproducible) {
  const auto s = mono(random_series(500, 8));
  for (auto kind : {NoiseKind::gaussian, NoiseKind::salt_pepper}) {
    EXPECT_EQ(inject_noise(s, kind, {}, 77), inject_noise(s, kind, {}, 77));
    EXPECT_NE(inject_noise(s, kind, {}, 77), inject_noise(s, kind, {}, 78));
  }
  EXPECT_THROW(inject_noise(s, NoiseKind::salt_pepper, {0.0, 0.1, 1.5, 0.5}, 1), ParameterError);
  EXPECT_THROW(inject_noise(s, NoiseKind::gaussian, {0.0, -0.1, 0.1, 0.5}, 1), ParameterError);
}

DegradationProfile small_profile() {
  DegradationProfile p;
  p.sample_rate_hz = 2000.0;
  p.duration_s = 20.0;
  return p;
}

double window_energy(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

TEST(Synth, EnergyRisesAfterOnset) {
  const auto run = synth_run_to_failure(small_profile(), 3);
  const auto w = extract_windows(run.signal, 1000);
  const std::size_t decile = w.size() / 10;
  double first = 0.0;
  double last = 0.0;
  for (std::size_t i = 0; i < decile; ++i) {
    first += window_energy(w[i].channel(0));
    last += window_energy(w[w.size() - 1 - i].channel(0));
  }
  EXPECT_GT(last, first);
  EXPECT_EQ(run.metadata.failure_sample, run.signal.length() - 1);
  EXPECT_NEAR(run.metadata.onset_time_s, 10.0, 1e-9);
}

TEST(Synth, StationaryWithoutGrowth) {
  auto p = small_profile();
  p.growth_rate = 0.0;
  const auto run = synth_run_to_failure(p, 4);
  const auto w = extract_windows(run.signal, 4000);
  const double e0 = window_energy(w.front().channel(0));
  for (const auto& win : w) EXPECT_NEAR(window_energy(win.channel(0)) / e0, 1.0, 0.1);
}

TEST(Synth, SeedDeterminesOutput) {
  const auto p = small_profile();
  EXPECT_EQ(synth_run_to_failure(p, 5).signal, synth_run_to_failure(p, 5).signal);
  EXPECT_NE(synth_run_to_failure(p, 5).signal, synth_run_to_failure(p, 6).signal);
}

TEST(Synth, RejectsAliasedHarmonics) {
  auto p = small_profile();
  p.shaft_hz = 400.0;
  EXPECT_THROW(synth_run_to_failure(p, 1), ParameterError);
}

}  // namespace
}  // namespace carle
