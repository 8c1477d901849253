#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "carle/error.hpp"

namespace carle {

enum class LabelScheme { linear, piecewise };

inline std::string_view to_string(LabelScheme s) { return s == LabelScheme::linear ? "linear" : "piecewise"; }

inline LabelScheme parse_label_scheme(std::string_view s) {
  if (s == "linear") return LabelScheme::linear;
  if (s == "piecewise") return LabelScheme::piecewise;
  throw ParameterError("unknown label scheme '" + std::string(s) + "'");
}

/// Normalized remaining-useful-life targets, one per window, ending at 0.
struct RulLabels {
  std::vector<double> values;
  LabelScheme scheme = LabelScheme::linear;
  double knee_fraction = 0.0;
};

/// linear:    y_i = 1 - i / (n - 1)
/// piecewise: y_i = 1 up to i = knee * (n - 1), then linear decay to 0 at n - 1
inline RulLabels make_labels(std::size_t n_windows, LabelScheme scheme, double knee_fraction = 0.6) {
  if (n_windows < 2) throw ParameterError("labels need at least two windows");
  if (scheme == LabelScheme::piecewise && !(knee_fraction > 0.0 && knee_fraction < 1.0))
    throw ParameterError("piecewise knee fraction must lie in (0, 1), got " + std::to_string(knee_fraction));

  const auto last = static_cast<double>(n_windows - 1);
  RulLabels labels{std::vector<double>(n_windows), scheme, scheme == LabelScheme::piecewise ? knee_fraction : 0.0};
  const double knee = labels.knee_fraction * last;
  for (std::size_t i = 0; i < n_windows; ++i) {
    const auto x = static_cast<double>(i);
    labels.values[i] = x <= knee ? 1.0 : (last - x) / (last - knee);
  }
  labels.values.back() = 0.0;
  return labels;
}

}  // namespace carle
