#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "carle/config.hpp"
#include "carle/csv.hpp"
#include "carle/error.hpp"
#include "carle/features.hpp"
#include "carle/labels.hpp"
#include "carle/matrix.hpp"
#include "carle/nn/carle_net.hpp"

namespace carle {

/// Feature rows of one run-to-failure recording, in window order.
struct RunFeatures {
  std::size_t run = 0;
  std::size_t total_windows = 0;
  std::vector<std::size_t> window_index;
  std::vector<std::vector<double>> rows;

  std::size_t size() const noexcept { return rows.size(); }
};

struct FeatureTable {
  std::vector<std::string> names;
  std::vector<RunFeatures> runs;

  std::size_t width() const noexcept { return names.size(); }
  std::size_t rows() const {
    std::size_t n = 0;
    for (const auto& r : runs) n += r.size();
    return n;
  }

  Matrix matrix() const {
    Matrix m(rows(), width());
    std::size_t i = 0;
    for (const auto& r : runs)
      for (const auto& row : r.rows) std::copy(row.begin(), row.end(), m.data.begin() + (i++) * width());
    return m;
  }

  void append(RunFeatures run) {
    for (const auto& row : run.rows)
      if (row.size() != width())
        throw InputError("run " + std::to_string(run.run) + " has rows of width " + std::to_string(row.size()) +
                         ", table width is " + std::to_string(width()));
    runs.push_back(std::move(run));
  }
};

inline RunFeatures to_run(const FeatureSet& set, std::size_t run) {
  RunFeatures r{run, set.total_windows, {}, {}};
  for (const auto& v : set.vectors) {
    r.window_index.push_back(v.window_index);
    r.rows.push_back(v.values);
  }
  return r;
}

namespace csv {

/// Multi-run feature CSV: `run,window_index,<names...>` with one
/// `total_windows.<run>=N` comment per run.
inline Table from_table(const FeatureTable& t) {
  Table out;
  out.header = {"run", "window_index"};
  out.header.insert(out.header.end(), t.names.begin(), t.names.end());
  for (const auto& r : t.runs) {
    out.comments.push_back("total_windows." + std::to_string(r.run) + "=" + std::to_string(r.total_windows));
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::vector<double> row{static_cast<double>(r.run), static_cast<double>(r.window_index[i])};
      row.insert(row.end(), r.rows[i].begin(), r.rows[i].end());
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

inline FeatureTable to_feature_table(const Table& t, const std::string& source = "<features>") {
  const auto run_col = t.column_index("run");
  const auto win_col = t.column_index("window_index");
  if (run_col != 0 || win_col != 1)
    throw InputError(source + ": feature CSV must start with columns run,window_index");
  if (t.header.size() < 3) throw InputError(source + ": feature CSV has no feature columns");
  FeatureTable out;
  out.names.assign(t.header.begin() + 2, t.header.end());
  std::map<std::size_t, std::size_t> slot;
  for (const auto& row : t.rows) {
    if (row[0] < 0 || row[1] < 0 || row[0] != std::floor(row[0]) || row[1] != std::floor(row[1]))
      throw InputError(source + ": run and window_index must be non-negative integers");
    const auto run = static_cast<std::size_t>(row[0]);
    auto [it, fresh] = slot.emplace(run, out.runs.size());
    if (fresh) out.runs.push_back(RunFeatures{run, 0, {}, {}});
    auto& r = out.runs[it->second];
    const auto w = static_cast<std::size_t>(row[1]);
    if (!r.window_index.empty() && w <= r.window_index.back())
      throw InputError(source + ": window_index must increase within run " + std::to_string(run));
    r.window_index.push_back(w);
    r.rows.emplace_back(row.begin() + 2, row.end());
  }
  for (auto& r : out.runs) {
    auto total = metadata(t, "total_windows." + std::to_string(r.run));
    if (total.empty() && out.runs.size() == 1) total = metadata(t, "total_windows");
    r.total_windows = total.empty() ? r.window_index.back() + 1 : std::stoul(total);
    if (r.total_windows <= r.window_index.back())
      throw InputError(source + ": total_windows of run " + std::to_string(r.run) + " is below its last window index");
  }
  return out;
}

inline Table from_labels(const std::vector<double>& labels) {
  Table t;
  t.header = {"rul"};
  for (double v : labels) t.rows.push_back({v});
  return t;
}

inline std::vector<double> to_labels(const Table& t, const std::string& source = "<labels>") {
  if (t.columns() != 1) throw InputError(source + ": label CSV must have exactly one column");
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.push_back(r[0]);
  return out;
}

}  // namespace csv

/// RUL label of every feature row, derived from its window position within
/// the full run.
inline std::vector<double> table_labels(const FeatureTable& t, LabelScheme scheme, double knee) {
  std::vector<double> out;
  out.reserve(t.rows());
  for (const auto& r : t.runs) {
    if (r.total_windows < 2) throw InputError("run " + std::to_string(r.run) + " has fewer than two windows");
    const auto labels = make_labels(r.total_windows, scheme, knee);
    for (std::size_t w : r.window_index) out.push_back(labels.values[w]);
  }
  return out;
}

/// Per-feature standardization. `global` uses statistics of the training
/// rows; `baseline` subtracts each run's mean over its leading windows and
/// divides by the pooled training spread of those baseline-centred rows.
struct Normalizer {
  NormalizationMode mode = NormalizationMode::none;
  double baseline_fraction = 0.2;
  double clip = 0.0;
  std::vector<double> center;
  std::vector<double> scale;

  static std::size_t baseline_rows(const RunFeatures& r, double fraction) {
    const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(r.size())));
    return std::clamp<std::size_t>(n, 1, std::max<std::size_t>(1, r.size()));
  }

  static std::vector<double> baseline_mean(const RunFeatures& r, double fraction) {
    const std::size_t n = baseline_rows(r, fraction);
    std::vector<double> mu(r.rows.empty() ? 0 : r.rows.front().size(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < mu.size(); ++c) mu[c] += r.rows[i][c];
    for (double& v : mu) v /= static_cast<double>(n);
    return mu;
  }

  static Normalizer fit(const FeatureTable& t, const NormalizationConfig& cfg) {
    Normalizer n{cfg.mode, cfg.baseline_fraction, cfg.clip, std::vector<double>(t.width(), 0.0),
                 std::vector<double>(t.width(), 1.0)};
    if (cfg.mode == NormalizationMode::none) return n;
    if (t.rows() < 2) throw InputError("normalization needs at least two rows");
    const auto d = t.width();
    std::vector<double> sum(d, 0.0);
    std::vector<double> sq(d, 0.0);
    std::size_t count = 0;
    for (const auto& r : t.runs) {
      const auto offset = cfg.mode == NormalizationMode::baseline ? baseline_mean(r, cfg.baseline_fraction)
                                                                  : std::vector<double>(d, 0.0);
      for (const auto& row : r.rows) {
        for (std::size_t c = 0; c < d; ++c) {
          const double v = row[c] - offset[c];
          sum[c] += v;
          sq[c] += v * v;
        }
        ++count;
      }
    }
    for (std::size_t c = 0; c < d; ++c) {
      const double mean = sum[c] / static_cast<double>(count);
      const double var = std::max(0.0, sq[c] / static_cast<double>(count) - mean * mean);
      const double sd = std::sqrt(var);
      n.center[c] = cfg.mode == NormalizationMode::global ? mean : 0.0;
      n.scale[c] = sd > 1e-12 ? sd : 1.0;
    }
    return n;
  }

  FeatureTable apply(const FeatureTable& t) const {
    if (t.width() != center.size())
      throw InputError("normalizer expects " + std::to_string(center.size()) + " features, got " +
                       std::to_string(t.width()));
    FeatureTable out = t;
    for (auto& r : out.runs) {
      const auto offset =
          mode == NormalizationMode::baseline ? baseline_mean(r, baseline_fraction) : std::vector<double>(t.width(), 0.0);
      for (auto& row : r.rows)
        for (std::size_t c = 0; c < row.size(); ++c) {
          double v = (row[c] - offset[c] - center[c]) / scale[c];
          if (clip > 0.0) v = std::clamp(v, -clip, clip);
          row[c] = v;
        }
    }
    return out;
  }
};

/// Lookback sequences: sample i of a run stacks rows i-seq_len+1 .. i,
/// repeating the run's first row where the history is short.
inline nn::Tensor make_sequences(const FeatureTable& t, std::size_t seq_len) {
  if (seq_len == 0) throw ParameterError("sequence length must be positive");
  const std::size_t d = t.width();
  nn::Tensor out({t.rows(), seq_len, d});
  std::size_t b = 0;
  for (const auto& r : t.runs) {
    for (std::size_t i = 0; i < r.size(); ++i, ++b) {
      for (std::size_t s = 0; s < seq_len; ++s) {
        const std::size_t back = seq_len - 1 - s;
        const std::size_t src = i >= back ? i - back : 0;
        std::copy(r.rows[src].begin(), r.rows[src].end(), out.data.begin() + (b * seq_len + s) * d);
      }
    }
  }
  return out;
}

}  // namespace carle
