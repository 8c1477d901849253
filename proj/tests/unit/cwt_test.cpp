#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "carle/cwt.hpp"
#include "carle/features.hpp"

namespace carle {
namespace {

TEST(ScaleGrid, EndpointsFollowCenterFrequency) {
  const auto g = build_scale_grid(35.0, 25000.0, 64, 0.81);
  EXPECT_NEAR(g.scales.front(), 0.81 * 25000.0 / 105.0, 1e-9);
  EXPECT_NEAR(g.scales.back(), 0.81 * 25000.0 / (35.0 / 3.0), 1e-9);
  EXPECT_NEAR(g.scales.front(), 192.857, 1e-3);
  EXPECT_NEAR(g.scales.back(), 1735.714, 1e-3);
  EXPECT_NEAR(g.frequency_of(g.scales.front()), 105.0, 1e-9);
}

TEST(ScaleGrid, LogSpacedAndIncreasing) {
  const auto g = build_scale_grid(40.0, 2000.0, 32);
  const double ratio = g.scales[1] / g.scales[0];
  for (std::size_t i = 1; i < g.count(); ++i) {
    EXPECT_GT(g.scales[i], g.scales[i - 1]);
    EXPECT_NEAR(g.scales[i] / g.scales[i - 1], ratio, 1e-9 * ratio);
  }
}

TEST(ScaleGrid, TwoScalesAreTheEndpoints) {
  const auto g = build_scale_grid(35.0, 2000.0, 2);
  const double a_min = 0.81 * 2000.0 / 105.0;
  const double a_max = 0.81 * 2000.0 * 3.0 / 35.0;
  EXPECT_EQ(g.scales, (std::vector<double>{a_min, a_max}));
}

TEST(ScaleGrid, RejectsInvalidSettings) {
  EXPECT_THROW(build_scale_grid(0.0, 2000.0), ParameterError);
  EXPECT_THROW(build_scale_grid(35.0, 200.0), ParameterError);
  EXPECT_THROW(build_scale_grid(35.0, 2000.0, 1), ParameterError);
}

TEST(Morlet, UnitAtOrigin) {
  EXPECT_EQ(morlet(0.0, 0.81), std::complex<double>(1.0, 0.0));
  EXPECT_EQ(morlet(0.0, 0.81, MorletPhase::literal), std::complex<double>(1.0, 0.0));
  EXPECT_NEAR(std::abs(morlet(1.3, 0.81)), std::exp(-0.5 * 1.69), 1e-15);
  EXPECT_NEAR(morlet(0.5, 0.81).imag(), std::exp(-0.125) * std::sin(std::numbers::pi * 0.81), 1e-15);
}

std::vector<double> oracle_signal() {
  std::vector<double> x(32);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double t = static_cast<double>(i);
    x[i] = std::sin(2.0 * std::numbers::pi * 50.0 * t / 2000.0) +
           0.3 * std::cos(2.0 * std::numbers::pi * 90.0 * t / 2000.0 + 0.2) + 0.05 * t / 32.0;
  }
  return x;
}

TEST(Transform, MatchesDirectSummationOracle) {
  // numpy direct summation of dt/sqrt(a) * x(t) * conj(psi((t - b) / a)) over the window
  const auto g = build_scale_grid(35.0, 2000.0, 4);
  const auto s = transform(oracle_signal(), g);
  ASSERT_EQ(s.rows, 4u);
  ASSERT_EQ(s.cols, 32u);
  struct Ref {
    std::size_t a, b;
    double re, im;
  };
  const Ref refs[] = {{0, 0, 1.4811139378810757e-05, -0.00012282838022679608},
                      {0, 15, 0.00022375329040578683, -0.00031752472243113517},
                      {1, 7, 0.001116824587416994, -0.0004220498594399886},
                      {2, 31, -0.0004203027256015004, 0.0005934604626345111},
                      {3, 16, 0.0002569654638607584, 0.00024187001670791545}};
  for (const auto& r : refs) {
    EXPECT_NEAR(s(r.a, r.b).real(), r.re, 1e-12) << r.a << "," << r.b;
    EXPECT_NEAR(s(r.a, r.b).imag(), r.im, 1e-12) << r.a << "," << r.b;
  }
}

TEST(Transform, ZeroWindowGivesZeroScalogram) {
  const auto g = build_scale_grid(35.0, 2000.0, 8);
  const auto s = transform(std::vector<double>(64, 0.0), g);
  for (const auto& c : s.coefficients) EXPECT_EQ(c, std::complex<double>(0.0, 0.0));
  const auto e = energy(s);
  EXPECT_EQ(e.total, 0.0);
}

TEST(Transform, LinearInTheSignal) {
  const auto g = build_scale_grid(35.0, 2000.0, 6);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d;
  std::vector<double> x(100), y(100), mix(100);
  for (std::size_t i = 0; i < 100; ++i) {
    x[i] = d(rng);
    y[i] = d(rng);
    mix[i] = 2.0 * x[i] - 0.5 * y[i];
  }
  const auto sx = transform(x, g);
  const auto sy = transform(y, g);
  const auto sm = transform(mix, g);
  for (std::size_t i = 0; i < sm.coefficients.size(); ++i)
    EXPECT_LT(std::abs(sm.coefficients[i] - (2.0 * sx.coefficients[i] - 0.5 * sy.coefficients[i])), 1e-12);
}

TEST(Transform, RecoversToneFrequencyWithinOneBin) {
  const double fs = 2000.0;
  const auto g = build_scale_grid(35.0, fs, 32);
  for (double f : {14.0, 35.0, 60.0, 100.0}) {
    std::vector<double> x(1024);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs);
    const double got = dominant_frequency(energy(transform(x, g)).per_scale, g);
    const double bin = std::log(g.scales[1] / g.scales[0]);
    EXPECT_LE(std::abs(std::log(got / f)), bin * (1.0 + 1e-9)) << f;
  }
}

TEST(Transform, AllCoefficientsFinite) {
  const auto g = build_scale_grid(35.0, 2000.0, 16);
  std::vector<double> x(256);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = (i % 7 == 0) ? 1e6 : -1e-6;
  const auto s = transform(x, g);
  EXPECT_EQ(s.coefficients.size(), 16u * 256u);
  for (const auto& c : s.coefficients) EXPECT_TRUE(std::isfinite(std::abs(c)));
}

}  // namespace
}  // namespace carle
