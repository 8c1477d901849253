#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carle/adapt.hpp"
#include "carle/config.hpp"
#include "carle/dataset.hpp"
#include "carle/error.hpp"
#include "carle/forest.hpp"
#include "carle/matrix.hpp"
#include "carle/metrics.hpp"
#include "carle/nn/carle_net.hpp"
#include "carle/nn/train.hpp"

namespace carle {

/// Everything needed to score new feature rows: the normalizer, the trained
/// network, the forest on its logits (absent for CARL) and the normalized
/// training rows and logits kept as the alignment reference.
struct TrainedModel {
  ExperimentConfig config;
  std::vector<std::string> feature_names;
  Normalizer normalizer;
  nn::CarleNet net;
  std::optional<Forest> forest;
  nn::TrainReport report;
  Matrix train_features;
  Matrix train_logits;
};

inline nn::Dataset make_dataset(const FeatureTable& normalized, std::span<const double> labels, std::size_t seq_len) {
  if (labels.size() != normalized.rows())
    throw InputError("feature table has " + std::to_string(normalized.rows()) + " rows but " +
                     std::to_string(labels.size()) + " labels");
  return {make_sequences(normalized, seq_len), {labels.begin(), labels.end()}};
}

/// Network training followed by the forest fit on the network's logits.
inline TrainedModel fit_model(const FeatureTable& features, std::span<const double> labels,
                              const ExperimentConfig& config, const FeatureTable* val_features = nullptr,
                              std::span<const double> val_labels = {}) {
  config.validate();
  if (features.rows() == 0) throw InputError("training feature table is empty");
  TrainedModel m;
  m.config = config;
  m.feature_names = features.names;
  m.normalizer = Normalizer::fit(features, config.normalization);
  const auto normalized = m.normalizer.apply(features);
  const auto train = make_dataset(normalized, labels, config.model.seq_len);

  std::optional<nn::Dataset> val;
  if (val_features && val_features->rows() > 0) {
    if (val_features->names != features.names) throw InputError("validation features do not match training columns");
    val = make_dataset(m.normalizer.apply(*val_features), val_labels, config.model.seq_len);
  }

  m.net = nn::CarleNet(model_profile(config, features.width()), subsystem_seed(config.seed, "init"));
  auto tc = config.train;
  tc.seed = subsystem_seed(config.seed, "shuffle");
  m.report = nn::train(m.net, train, tc, val ? &*val : nullptr);

  m.train_features = normalized.matrix();
  m.train_logits = nn::logits(m.net, train.x);
  if (uses_forest(config))
    m.forest = Forest::fit(m.train_logits, train.y, config.forest, subsystem_seed(config.seed, "bootstrap"));
  return m;
}

/// Final RUL estimates from logit rows: the forest when present, otherwise
/// the network's scalar head.
inline std::vector<double> predict_from_logits(TrainedModel& m, const Matrix& logits) {
  if (m.forest) return m.forest->predict(logits);
  std::vector<double> out(logits.rows);
  nn::Mat row(1, static_cast<Eigen::Index>(logits.cols));
  for (std::size_t r = 0; r < logits.rows; ++r) {
    for (std::size_t c = 0; c < logits.cols; ++c) row(0, static_cast<Eigen::Index>(c)) = logits(r, c);
    out[r] = m.net.head().forward(row)(0, 0);
  }
  return out;
}

inline std::vector<double> predict_normalized(TrainedModel& m, const FeatureTable& normalized) {
  const auto x = make_sequences(normalized, m.config.model.seq_len);
  if (!m.forest) return m.net.forward(x).prediction;
  return m.forest->predict(nn::logits(m.net, x));
}

inline void check_columns(const TrainedModel& m, const FeatureTable& t) {
  if (t.names != m.feature_names)
    throw InputError("feature columns do not match the model (expected " + std::to_string(m.feature_names.size()) +
                     " columns starting with '" + (m.feature_names.empty() ? "" : m.feature_names.front()) + "')");
}

inline std::vector<double> predict(TrainedModel& m, const FeatureTable& features) {
  check_columns(m, features);
  return predict_normalized(m, m.normalizer.apply(features));
}

/// PCA on the training rows, CORAL in the component space mapping the new
/// domain onto the training statistics, then back to feature space.
inline FeatureTable align_features(const TrainedModel& m, const FeatureTable& normalized, const AdaptConfig& cfg) {
  const auto source = adapt::to_eigen(normalized.matrix());
  const auto reference = adapt::to_eigen(m.train_features);
  const auto max_k = std::min<std::size_t>(static_cast<std::size_t>(reference.rows()) - 1,
                                           static_cast<std::size_t>(reference.cols()));
  const std::size_t k = cfg.pca_components == 0 ? max_k : cfg.pca_components;
  const auto pca = adapt::pca_fit(reference, k);
  const auto coral = adapt::coral_fit(adapt::pca_transform(pca, source), adapt::pca_transform(pca, reference), cfg.ridge);
  const auto aligned = adapt::from_eigen(
      adapt::pca_inverse_transform(pca, adapt::coral_apply(coral, adapt::pca_transform(pca, source))));
  FeatureTable out = normalized;
  std::size_t i = 0;
  for (auto& r : out.runs)
    for (auto& row : r.rows) {
      const auto src = aligned.row(i++);
      row.assign(src.begin(), src.end());
    }
  return out;
}

/// Predictions for a new domain after distribution alignment, either on the
/// normalized features or on the logit vectors.
inline std::vector<double> predict_aligned(TrainedModel& m, const FeatureTable& features, const AdaptConfig& cfg) {
  check_columns(m, features);
  const auto normalized = m.normalizer.apply(features);
  if (!cfg.logit_space) return predict_normalized(m, align_features(m, normalized, cfg));
  const auto logits = nn::logits(m.net, make_sequences(normalized, m.config.model.seq_len));
  const auto coral = adapt::coral_fit(adapt::to_eigen(logits), adapt::to_eigen(m.train_logits), cfg.ridge);
  return predict_from_logits(m, adapt::from_eigen(adapt::coral_apply(coral, adapt::to_eigen(logits))));
}

}  // namespace carle
