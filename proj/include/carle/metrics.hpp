#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "carle/error.hpp"

namespace carle {

namespace detail {
inline void check_pair(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw InputError("metric inputs differ in length: " + std::to_string(y.size()) + " vs " +
                     std::to_string(y_hat.size()));
  if (y.empty()) throw InputError("metric inputs are empty");
}
}  // namespace detail

inline double mae(std::span<const double> y, std::span<const double> y_hat) {
  detail::check_pair(y, y_hat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y[i] - y_hat[i]);
  return acc / static_cast<double>(y.size());
}

/// Reported as "MSE" in the RUL literature this model comes from.
inline double rmse(std::span<const double> y, std::span<const double> y_hat) {
  detail::check_pair(y, y_hat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y[i] - y_hat[i];
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(y.size()));
}

/// Asymmetric PHM score: early predictions cost exp(-d/13) - 1, late ones
/// exp(d/10) - 1, with d = y_hat - y.
inline double phm_score(std::span<const double> y, std::span<const double> y_hat) {
  detail::check_pair(y, y_hat);
  double acc = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y_hat[i] - y[i];
    acc += d < 0.0 ? std::expm1(-d / 13.0) : std::expm1(d / 10.0);
  }
  return acc;
}

struct MetricReport {
  double mae = 0.0;
  double rmse = 0.0;
  double score = 0.0;
  std::size_t n = 0;
};

inline MetricReport evaluate(std::span<const double> y, std::span<const double> y_hat) {
  return {mae(y, y_hat), rmse(y, y_hat), phm_score(y, y_hat), y.size()};
}

}  // namespace carle
