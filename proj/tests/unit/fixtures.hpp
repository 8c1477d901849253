#pragma once

#include "carle/commands.hpp"

namespace carle::testing {

/// Small experiment: 2 kHz sampling, 256-sample windows, 16 scales.
inline ExperimentConfig desk_config(std::uint64_t seed = 0) {
  ExperimentConfig c;
  c.seed = seed;
  c.extraction.n_scales = 16;
  c.synth.duration_s = 10.0;
  c.train.max_epochs = 60;
  c.forest.n_trees = 40;
  return c;
}

/// Features of `runs` synthetic run-to-failure recordings at `shaft_hz`.
inline FeatureTable synthetic_features(const ExperimentConfig& c, double shaft_hz, std::size_t runs,
                                       std::size_t first_run = 0) {
  const auto profile = cmd::synth_profile(c, shaft_hz);
  auto ec = c.extraction;
  ec.shaft_hz = shaft_hz;
  FeatureTable t;
  for (std::size_t r = first_run; r < first_run + runs; ++r) {
    const auto run = synth_run_to_failure(profile, subsystem_seed(c.seed, "synth") + r);
    const auto set = extract_features(run.signal, ec, nullptr);
    if (t.names.empty()) t.names = set.names;
    t.append(to_run(set, r));
  }
  return t;
}

/// A 50-window training set from one synthetic run, as network sequences.
inline nn::Dataset overfit_dataset(const ExperimentConfig& c) {
  auto cc = c;
  cc.synth.duration_s = 50.0 * static_cast<double>(c.extraction.window_len) / c.sample_rate_hz;
  const auto t = synthetic_features(cc, c.extraction.shaft_hz, 1);
  const auto labels = table_labels(t, c.label_scheme, c.knee);
  const auto n = Normalizer::fit(t, c.normalization);
  return make_dataset(n.apply(t), labels, c.model.seq_len);
}

}  // namespace carle::testing
