#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "carle/error.hpp"
#include "carle/matrix.hpp"

namespace carle {

struct TreeConfig {
  std::size_t max_features = 0;  // 0 = all features
  std::size_t min_samples_leaf = 2;
  std::size_t max_depth = 0;  // 0 = unlimited
};

/// CART regression tree. Internal nodes send x[feature] <= threshold left.
class RegressionTree {
public:
  struct Node {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;
    std::size_t samples = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  RegressionTree() = default;
  explicit RegressionTree(std::vector<Node> nodes, std::size_t width) : nodes_(std::move(nodes)), width_(width) {}

  /// Grows a tree on the rows listed in `sample_rows` (duplicates allowed).
  template <class Rng>
  static RegressionTree fit(const Matrix& x, std::span<const double> y, std::vector<std::size_t> sample_rows,
                            const TreeConfig& config, Rng& rng) {
    if (sample_rows.empty()) throw InputError("cannot fit a tree on zero samples");
    RegressionTree tree;
    tree.width_ = x.cols;
    Builder<Rng> b{x, y, config, rng, tree.nodes_};
    b.grow(sample_rows, 0);
    return tree;
  }

  double predict(std::span<const double> row) const {
    if (row.size() != width_)
      throw InputError("tree expects " + std::to_string(width_) + " features, got " + std::to_string(row.size()));
    std::size_t i = 0;
    while (!nodes_[i].is_leaf())
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(nodes_[i].feature)] <= nodes_[i].threshold
                                       ? nodes_[i].left
                                       : nodes_[i].right);
    return nodes_[i].value;
  }

  const std::vector<Node>& nodes() const noexcept { return nodes_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t depth() const { return nodes_.empty() ? 0 : depth_from(0); }

  friend bool operator==(const RegressionTree&, const RegressionTree&) = default;

private:
  template <class Rng>
  struct Builder {
    const Matrix& x;
    std::span<const double> y;
    const TreeConfig& config;
    Rng& rng;
    std::vector<Node>& nodes;

    struct Split {
      std::int32_t feature = -1;
      double threshold = 0.0;
      double sse = std::numeric_limits<double>::infinity();
      std::size_t left_count = 0;
    };

    std::int32_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
      const auto id = static_cast<std::int32_t>(nodes.size());
      nodes.push_back({});
      double sum = 0.0;
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t r : rows) {
        sum += y[r];
        lo = std::min(lo, y[r]);
        hi = std::max(hi, y[r]);
      }
      nodes[static_cast<std::size_t>(id)].value = lo == hi ? lo : sum / static_cast<double>(rows.size());
      nodes[static_cast<std::size_t>(id)].samples = rows.size();

      const bool depth_ok = config.max_depth == 0 || depth < config.max_depth;
      if (!depth_ok || lo == hi || rows.size() < 2 * std::max<std::size_t>(1, config.min_samples_leaf)) return id;

      const Split best = find_split(rows);
      if (best.feature < 0) return id;

      std::vector<std::size_t> left;
      std::vector<std::size_t> right;
      left.reserve(best.left_count);
      right.reserve(rows.size() - best.left_count);
      for (std::size_t r : rows)
        (x(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right).push_back(r);
      rows.clear();
      rows.shrink_to_fit();

      const auto l = grow(left, depth + 1);
      const auto rr = grow(right, depth + 1);
      auto& node = nodes[static_cast<std::size_t>(id)];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = l;
      node.right = rr;
      return id;
    }

    Split find_split(const std::vector<std::size_t>& rows) {
      const std::size_t width = x.cols;
      std::vector<std::size_t> features(width);
      std::iota(features.begin(), features.end(), std::size_t{0});
      const std::size_t k = config.max_features == 0 ? width : std::min(width, config.max_features);
      if (k < width) {
        // partial Fisher-Yates; candidates are then scanned in index order
        for (std::size_t i = 0; i < k; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, width - 1);
          std::swap(features[i], features[pick(rng)]);
        }
        features.resize(k);
        std::sort(features.begin(), features.end());
      }

      const std::size_t n = rows.size();
      const std::size_t min_leaf = std::max<std::size_t>(1, config.min_samples_leaf);
      double total = 0.0;
      double total_sq = 0.0;
      for (std::size_t r : rows) {
        total += y[r];
        total_sq += y[r] * y[r];
      }

      Split best;
      std::vector<std::size_t> order(rows);
      for (std::size_t f : features) {
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
          const double xa = x(a, f);
          const double xb = x(b, f);
          return xa < xb || (xa == xb && a < b);
        });
        double left_sum = 0.0;
        double left_sq = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
          const double yi = y[order[i]];
          left_sum += yi;
          left_sq += yi * yi;
          const std::size_t nl = i + 1;
          const std::size_t nr = n - nl;
          if (nl < min_leaf || nr < min_leaf) continue;
          const double xl = x(order[i], f);
          const double xr = x(order[i + 1], f);
          if (!(xl < xr)) continue;
          const double right_sum = total - left_sum;
          const double sse = (left_sq - left_sum * left_sum / static_cast<double>(nl)) +
                             (total_sq - left_sq - right_sum * right_sum / static_cast<double>(nr));
          if (sse < best.sse) best = {static_cast<std::int32_t>(f), midpoint_between(xl, xr), sse, nl};
        }
      }
      return best;
    }
  };

  static double midpoint_between(double lo, double hi) {
    const double mid = lo + (hi - lo) / 2.0;
    return mid < hi ? mid : lo;
  }

  std::size_t depth_from(std::size_t i) const {
    if (nodes_[i].is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(nodes_[i].left)),
                        depth_from(static_cast<std::size_t>(nodes_[i].right)));
  }

  std::vector<Node> nodes_;
  std::size_t width_ = 0;
};

struct ForestConfig {
  std::size_t n_trees = 800;
  std::size_t max_features = 0;  // 0 = floor(sqrt(width))
  std::size_t min_samples_leaf = 2;
  std::size_t max_depth = 0;
  bool bootstrap = true;
  bool clamp_unit = false;  // clamp predictions to [0, 1]
};

/// Bagged regression forest; the prediction is the plain mean of its trees.
class Forest {
public:
  Forest() = default;
  Forest(std::vector<RegressionTree> trees, std::vector<std::uint64_t> seeds, std::size_t width, bool clamp_unit)
      : trees_(std::move(trees)), seeds_(std::move(seeds)), width_(width), clamp_unit_(clamp_unit) {}

  static Forest fit(const Matrix& x, std::span<const double> y, const ForestConfig& config, std::uint64_t seed) {
    if (x.rows == 0 || y.empty()) throw InputError("cannot fit a forest on an empty dataset");
    if (x.rows != y.size())
      throw InputError("forest inputs have " + std::to_string(x.rows) + " rows but " + std::to_string(y.size()) +
                       " targets");
    if (x.rows < 2) throw InputError("forest needs at least two samples");
    if (config.n_trees == 0) throw ParameterError("forest needs at least one tree");

    TreeConfig tree_config{config.max_features == 0
                               ? std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(
                                                              static_cast<double>(x.cols)))))
                               : config.max_features,
                           config.min_samples_leaf, config.max_depth};

    Forest forest;
    forest.width_ = x.cols;
    forest.clamp_unit_ = config.clamp_unit;
    std::seed_seq seq{seed, seed >> 32, std::uint64_t{0x5eedf0e5}};
    std::vector<std::uint32_t> raw(2 * config.n_trees);
    seq.generate(raw.begin(), raw.end());
    forest.seeds_.resize(config.n_trees);
    for (std::size_t t = 0; t < config.n_trees; ++t)
      forest.seeds_[t] = (static_cast<std::uint64_t>(raw[2 * t]) << 32) | raw[2 * t + 1];

    forest.trees_.reserve(config.n_trees);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
      std::mt19937_64 rng(forest.seeds_[t]);
      std::vector<std::size_t> rows(x.rows);
      if (config.bootstrap) {
        std::uniform_int_distribution<std::size_t> pick(0, x.rows - 1);
        for (auto& r : rows) r = pick(rng);
      } else {
        std::iota(rows.begin(), rows.end(), std::size_t{0});
      }
      forest.trees_.push_back(RegressionTree::fit(x, y, std::move(rows), tree_config, rng));
    }
    return forest;
  }

  double predict_row(std::span<const double> row) const {
    if (trees_.empty()) throw InputError("forest has no trees");
    if (row.size() != width_)
      throw InputError("forest expects " + std::to_string(width_) + " features, got " + std::to_string(row.size()));
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.predict(row);
    const double mean = sum / static_cast<double>(trees_.size());
    return clamp_unit_ ? std::clamp(mean, 0.0, 1.0) : mean;
  }

  std::vector<double> predict(const Matrix& x) const {
    if (x.cols != width_)
      throw InputError("forest expects " + std::to_string(width_) + " features, got " + std::to_string(x.cols));
    std::vector<double> out(x.rows);
    for (std::size_t r = 0; r < x.rows; ++r) out[r] = predict_row(x.row(r));
    return out;
  }

  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  const std::vector<std::uint64_t>& seeds() const noexcept { return seeds_; }
  std::size_t width() const noexcept { return width_; }
  bool clamp_unit() const noexcept { return clamp_unit_; }

  friend bool operator==(const Forest&, const Forest&) = default;

private:
  std::vector<RegressionTree> trees_;
  std::vector<std::uint64_t> seeds_;
  std::size_t width_ = 0;
  bool clamp_unit_ = false;
};

}  // namespace carle
