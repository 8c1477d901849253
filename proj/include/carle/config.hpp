#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "carle/error.hpp"
#include "carle/features.hpp"
#include "carle/forest.hpp"
#include "carle/labels.hpp"
#include "carle/nn/carle_net.hpp"
#include "carle/nn/train.hpp"
#include "carle/signal.hpp"

namespace carle {

using Json = nlohmann::ordered_json;

enum class NormalizationMode { none, global, baseline };

inline std::string_view to_string(NormalizationMode m) {
  switch (m) {
    case NormalizationMode::none: return "none";
    case NormalizationMode::global: return "global";
    case NormalizationMode::baseline: return "baseline";
  }
  return "none";
}

inline NormalizationMode parse_normalization(std::string_view s) {
  if (s == "none") return NormalizationMode::none;
  if (s == "global") return NormalizationMode::global;
  if (s == "baseline") return NormalizationMode::baseline;
  throw ParameterError("unknown normalization mode '" + std::string(s) + "' (expected none, global or baseline)");
}

enum class Variant { carle, carl, crle, cale };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::carle: return "carle";
    case Variant::carl: return "carl";
    case Variant::crle: return "crle";
    case Variant::cale: return "cale";
  }
  return "carle";
}

inline Variant parse_variant(std::string_view s) {
  if (s == "carle") return Variant::carle;
  if (s == "carl") return Variant::carl;
  if (s == "crle") return Variant::crle;
  if (s == "cale") return Variant::cale;
  throw ParameterError("unknown variant '" + std::string(s) + "' (expected carle, carl, crle or cale)");
}

struct NormalizationConfig {
  NormalizationMode mode = NormalizationMode::baseline;
  double baseline_fraction = 0.2;  // leading share of each run used as its healthy reference
  double clip = 10.0;              // 0 disables clipping
};

struct AdaptConfig {
  std::size_t pca_components = 0;  // 0 = min(width, rows - 1)
  double ridge = 1e-6;
  bool logit_space = false;
};

struct ModelConfig {
  std::string profile = "toy";
  std::size_t seq_len = 4;
  Variant variant = Variant::carle;
  bool cross_block_residual = false;
  double l2_lambda = 0.005;
};

struct SynthConfig {
  double duration_s = 40.0;
  double onset_fraction = 0.3;
  double growth_rate = 1.0;
  std::size_t channel_count = 2;
  double noise_std = 0.2;
  double impact_amplitude = 2.0;
  double wear_gain = 0.5;
};

/// Every knob of an experiment. Nested JSON sections map one-to-one onto
/// the member structs.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  double sample_rate_hz = 2000.0;
  ExtractionConfig extraction{0.75, 256, 0, 35.0, 32, 0.81, MorletPhase::cycles, true};
  LabelScheme label_scheme = LabelScheme::linear;
  double knee = 0.6;
  NormalizationConfig normalization;
  ModelConfig model;
  nn::TrainConfig train{16, 300, 1e-3, 0.9, 1e-7, 25, 10, 0.5, 1e-6, 0, true};
  ForestConfig forest{200, 0, 2, 0, true, true};
  NoiseParams noise;
  AdaptConfig adapt;
  SynthConfig synth;

  void validate() const;
};

namespace detail {

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ParameterError(message);
}

}  // namespace detail

inline void ExperimentConfig::validate() const {
  using detail::require;
  require(sample_rate_hz > 0.0, "signal.sample_rate_hz must be positive");
  require(extraction.sigma_g >= 0.0, "extraction.sigma_g must be >= 0");
  require(extraction.window_len >= 4, "extraction.window_len must be >= 4");
  require(extraction.shaft_hz > 0.0, "extraction.shaft_hz must be positive");
  require(3.0 * extraction.shaft_hz < sample_rate_hz / 2.0,
          "extraction.shaft_hz: 3 x shaft frequency must stay below Nyquist");
  require(extraction.n_scales >= 2, "extraction.n_scales must be >= 2");
  require(extraction.center_freq > 0.0, "extraction.center_freq must be positive");
  require(knee > 0.0 && knee < 1.0, "labels.knee must lie in (0, 1)");
  require(normalization.baseline_fraction > 0.0 && normalization.baseline_fraction <= 1.0,
          "normalization.baseline_fraction must lie in (0, 1]");
  require(normalization.clip >= 0.0, "normalization.clip must be >= 0");
  require(model.seq_len >= 1, "model.seq_len must be >= 1");
  require(model.l2_lambda >= 0.0, "model.l2_lambda must be >= 0");
  (void)nn::ModelProfile::named(model.profile, 7, model.seq_len);
  train.validate();
  require(forest.n_trees >= 1, "forest.n_trees must be >= 1");
  require(forest.min_samples_leaf >= 1, "forest.min_samples_leaf must be >= 1");
  require(noise.std >= 0.0, "noise.gaussian_std must be >= 0");
  require(noise.fraction >= 0.0 && noise.fraction <= 1.0, "noise.salt_pepper_fraction must lie in [0, 1]");
  require(noise.amplitude > 0.0, "noise.salt_pepper_amplitude must be positive");
  require(adapt.ridge >= 0.0, "adapt.ridge must be >= 0");
  require(synth.duration_s > 0.0, "synth.duration_s must be positive");
  require(synth.onset_fraction >= 0.0 && synth.onset_fraction < 1.0, "synth.onset_fraction must lie in [0, 1)");
  require(synth.channel_count >= 1, "synth.channel_count must be >= 1");
  require(synth.noise_std >= 0.0, "synth.noise_std must be >= 0");
}

inline Json to_json(const ExperimentConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["signal"] = {{"sample_rate_hz", c.sample_rate_hz}};
  j["extraction"] = {{"sigma_g", c.extraction.sigma_g},
                     {"window_len", c.extraction.window_len},
                     {"stride", c.extraction.stride},
                     {"shaft_hz", c.extraction.shaft_hz},
                     {"n_scales", c.extraction.n_scales},
                     {"center_freq", c.extraction.center_freq},
                     {"morlet", c.extraction.phase == MorletPhase::cycles ? "cycles" : "literal"},
                     {"skip_degenerate", c.extraction.skip_degenerate}};
  j["labels"] = {{"scheme", std::string(to_string(c.label_scheme))}, {"knee", c.knee}};
  j["normalization"] = {{"mode", std::string(to_string(c.normalization.mode))},
                        {"baseline_fraction", c.normalization.baseline_fraction},
                        {"clip", c.normalization.clip}};
  j["model"] = {{"profile", c.model.profile},
                {"seq_len", c.model.seq_len},
                {"variant", std::string(to_string(c.model.variant))},
                {"cross_block_residual", c.model.cross_block_residual},
                {"l2_lambda", c.model.l2_lambda}};
  j["train"] = {{"batch_size", c.train.batch_size},
                {"max_epochs", c.train.max_epochs},
                {"learning_rate", c.train.learning_rate},
                {"rho", c.train.rho},
                {"epsilon", c.train.epsilon},
                {"early_stopping_patience", c.train.early_stopping_patience},
                {"reduce_lr_patience", c.train.reduce_lr_patience},
                {"reduce_lr_factor", c.train.reduce_lr_factor},
                {"min_learning_rate", c.train.min_learning_rate},
                {"shuffle", c.train.shuffle}};
  j["forest"] = {{"n_trees", c.forest.n_trees},
                 {"max_features", c.forest.max_features},
                 {"min_samples_leaf", c.forest.min_samples_leaf},
                 {"max_depth", c.forest.max_depth},
                 {"bootstrap", c.forest.bootstrap},
                 {"clamp_unit", c.forest.clamp_unit}};
  j["noise"] = {{"gaussian_mean", c.noise.mean},
                {"gaussian_std", c.noise.std},
                {"salt_pepper_fraction", c.noise.fraction},
                {"salt_pepper_amplitude", c.noise.amplitude}};
  j["adapt"] = {{"pca_components", c.adapt.pca_components},
                {"ridge", c.adapt.ridge},
                {"logit_space", c.adapt.logit_space}};
  j["synth"] = {{"duration_s", c.synth.duration_s},
                {"onset_fraction", c.synth.onset_fraction},
                {"growth_rate", c.synth.growth_rate},
                {"channel_count", c.synth.channel_count},
                {"noise_std", c.synth.noise_std},
                {"impact_amplitude", c.synth.impact_amplitude},
                {"wear_gain", c.synth.wear_gain}};
  return j;
}

namespace detail {

template <class T>
void read_key(const Json& section, const std::string& path, const char* key, T& out) {
  const auto it = section.find(key);
  if (it == section.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParameterError("config key " + path + "." + key + " has the wrong type: " + it->dump());
  }
}

inline void check_keys(const Json& section, const std::string& path, std::initializer_list<std::string_view> keys) {
  if (!section.is_object()) throw ParameterError("config section " + path + " must be an object");
  for (const auto& [k, v] : section.items()) {
    bool known = false;
    for (auto name : keys) known = known || k == name;
    if (!known) throw ParameterError("unknown config key " + (path.empty() ? k : path + "." + k));
  }
}

}  // namespace detail

/// Strict reader: unknown sections or keys and type mismatches are errors.
/// Missing keys keep the value already held by `c`.
inline void apply_json(ExperimentConfig& c, const Json& j) {
  using detail::check_keys;
  using detail::read_key;
  check_keys(j, "", {"seed", "signal", "extraction", "labels", "normalization", "model", "train", "forest", "noise",
                     "adapt", "synth"});
  read_key(j, "", "seed", c.seed);
  const Json empty = Json::object();
  auto section = [&](const char* name) -> const Json& {
    const auto it = j.find(name);
    return it == j.end() ? empty : *it;
  };

  const auto& sig = section("signal");
  check_keys(sig, "signal", {"sample_rate_hz"});
  read_key(sig, "signal", "sample_rate_hz", c.sample_rate_hz);

  const auto& ex = section("extraction");
  check_keys(ex, "extraction",
             {"sigma_g", "window_len", "stride", "shaft_hz", "n_scales", "center_freq", "morlet", "skip_degenerate"});
  read_key(ex, "extraction", "sigma_g", c.extraction.sigma_g);
  read_key(ex, "extraction", "window_len", c.extraction.window_len);
  read_key(ex, "extraction", "stride", c.extraction.stride);
  read_key(ex, "extraction", "shaft_hz", c.extraction.shaft_hz);
  read_key(ex, "extraction", "n_scales", c.extraction.n_scales);
  read_key(ex, "extraction", "center_freq", c.extraction.center_freq);
  read_key(ex, "extraction", "skip_degenerate", c.extraction.skip_degenerate);
  std::string morlet = c.extraction.phase == MorletPhase::cycles ? "cycles" : "literal";
  read_key(ex, "extraction", "morlet", morlet);
  if (morlet != "cycles" && morlet != "literal")
    throw ParameterError("extraction.morlet must be 'cycles' or 'literal', got '" + morlet + "'");
  c.extraction.phase = morlet == "cycles" ? MorletPhase::cycles : MorletPhase::literal;

  const auto& lb = section("labels");
  check_keys(lb, "labels", {"scheme", "knee"});
  std::string scheme(to_string(c.label_scheme));
  read_key(lb, "labels", "scheme", scheme);
  c.label_scheme = parse_label_scheme(scheme);
  read_key(lb, "labels", "knee", c.knee);

  const auto& nm = section("normalization");
  check_keys(nm, "normalization", {"mode", "baseline_fraction", "clip"});
  std::string mode(to_string(c.normalization.mode));
  read_key(nm, "normalization", "mode", mode);
  c.normalization.mode = parse_normalization(mode);
  read_key(nm, "normalization", "baseline_fraction", c.normalization.baseline_fraction);
  read_key(nm, "normalization", "clip", c.normalization.clip);

  const auto& md = section("model");
  check_keys(md, "model", {"profile", "seq_len", "variant", "cross_block_residual", "l2_lambda"});
  read_key(md, "model", "profile", c.model.profile);
  read_key(md, "model", "seq_len", c.model.seq_len);
  std::string variant(to_string(c.model.variant));
  read_key(md, "model", "variant", variant);
  c.model.variant = parse_variant(variant);
  read_key(md, "model", "cross_block_residual", c.model.cross_block_residual);
  read_key(md, "model", "l2_lambda", c.model.l2_lambda);

  const auto& tr = section("train");
  check_keys(tr, "train", {"batch_size", "max_epochs", "learning_rate", "rho", "epsilon", "early_stopping_patience",
                           "reduce_lr_patience", "reduce_lr_factor", "min_learning_rate", "shuffle"});
  read_key(tr, "train", "batch_size", c.train.batch_size);
  read_key(tr, "train", "max_epochs", c.train.max_epochs);
  read_key(tr, "train", "learning_rate", c.train.learning_rate);
  read_key(tr, "train", "rho", c.train.rho);
  read_key(tr, "train", "epsilon", c.train.epsilon);
  read_key(tr, "train", "early_stopping_patience", c.train.early_stopping_patience);
  read_key(tr, "train", "reduce_lr_patience", c.train.reduce_lr_patience);
  read_key(tr, "train", "reduce_lr_factor", c.train.reduce_lr_factor);
  read_key(tr, "train", "min_learning_rate", c.train.min_learning_rate);
  read_key(tr, "train", "shuffle", c.train.shuffle);

  const auto& fr = section("forest");
  check_keys(fr, "forest", {"n_trees", "max_features", "min_samples_leaf", "max_depth", "bootstrap", "clamp_unit"});
  read_key(fr, "forest", "n_trees", c.forest.n_trees);
  read_key(fr, "forest", "max_features", c.forest.max_features);
  read_key(fr, "forest", "min_samples_leaf", c.forest.min_samples_leaf);
  read_key(fr, "forest", "max_depth", c.forest.max_depth);
  read_key(fr, "forest", "bootstrap", c.forest.bootstrap);
  read_key(fr, "forest", "clamp_unit", c.forest.clamp_unit);

  const auto& nz = section("noise");
  check_keys(nz, "noise", {"gaussian_mean", "gaussian_std", "salt_pepper_fraction", "salt_pepper_amplitude"});
  read_key(nz, "noise", "gaussian_mean", c.noise.mean);
  read_key(nz, "noise", "gaussian_std", c.noise.std);
  read_key(nz, "noise", "salt_pepper_fraction", c.noise.fraction);
  read_key(nz, "noise", "salt_pepper_amplitude", c.noise.amplitude);

  const auto& ad = section("adapt");
  check_keys(ad, "adapt", {"pca_components", "ridge", "logit_space"});
  read_key(ad, "adapt", "pca_components", c.adapt.pca_components);
  read_key(ad, "adapt", "ridge", c.adapt.ridge);
  read_key(ad, "adapt", "logit_space", c.adapt.logit_space);

  const auto& sy = section("synth");
  check_keys(sy, "synth",
             {"duration_s", "onset_fraction", "growth_rate", "channel_count", "noise_std", "impact_amplitude",
              "wear_gain"});
  read_key(sy, "synth", "duration_s", c.synth.duration_s);
  read_key(sy, "synth", "onset_fraction", c.synth.onset_fraction);
  read_key(sy, "synth", "growth_rate", c.synth.growth_rate);
  read_key(sy, "synth", "channel_count", c.synth.channel_count);
  read_key(sy, "synth", "noise_std", c.synth.noise_std);
  read_key(sy, "synth", "impact_amplitude", c.synth.impact_amplitude);
  read_key(sy, "synth", "wear_gain", c.synth.wear_gain);
}

inline ExperimentConfig from_json(const Json& j) {
  ExperimentConfig c;
  apply_json(c, j);
  return c;
}

/// Defaults that differ between the named model profiles.
inline ExperimentConfig profile_defaults(const std::string& profile) {
  ExperimentConfig c;
  c.model.profile = profile;
  if (profile == "xjtu" || profile == "pronostia") {
    c.model.seq_len = 8;
    c.train.batch_size = 32;
    c.train.max_epochs = 100;
    c.forest.n_trees = 800;
  } else if (profile != "toy") {
    throw ParameterError("unknown model profile '" + profile + "' (expected toy, xjtu or pronostia)");
  }
  return c;
}

/// Turns `section.key=value` into a JSON patch. The value is parsed as JSON
/// when possible and kept as a string otherwise.
inline Json parse_override(std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ParameterError("override '" + std::string(assignment) + "' is not of the form key=value");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json patch = Json::object();
  Json* cursor = &patch;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ParameterError("override key '" + key + "' has an empty component");
    if (dot == std::string::npos) {
      (*cursor)[part] = value;
      break;
    }
    cursor = &(*cursor)[part];
    start = dot + 1;
  }
  return patch;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path + "'");
  try {
    return Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError("config file '" + path + "' is not valid JSON: " + e.what());
  }
}

/// Resolves a configuration: profile defaults, then the file, then the
/// command-line patches in order. The profile is taken from the highest
/// layer that names one.
inline ExperimentConfig resolve_config(const Json& file, const std::vector<Json>& patches) {
  std::string profile = "toy";
  auto pick_profile = [&](const Json& j) {
    if (j.contains("model") && j["model"].is_object() && j["model"].contains("profile") &&
        j["model"]["profile"].is_string())
      profile = j["model"]["profile"].get<std::string>();
  };
  pick_profile(file);
  for (const auto& p : patches) pick_profile(p);

  Json merged = to_json(profile_defaults(profile));
  if (!file.is_null()) {
    if (!file.is_object()) throw ParameterError("config file must hold a JSON object");
    merged.merge_patch(file);
  }
  for (const auto& p : patches) merged.merge_patch(p);
  ExperimentConfig c = from_json(merged);
  c.validate();
  return c;
}

/// FNV-1a 64 over the canonical JSON dump.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hash_hex(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

/// Independent stream for one subsystem, derived from the root seed.
inline std::uint64_t subsystem_seed(std::uint64_t root, std::string_view subsystem) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : subsystem) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = root + 0x9e3779b97f4a7c15ULL * (h | 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Model architecture for a config and input width, ablation flags applied.
inline nn::ModelProfile model_profile(const ExperimentConfig& c, std::size_t width) {
  auto p = nn::ModelProfile::named(c.model.profile, width, c.model.seq_len);
  p.l2_lambda = c.model.l2_lambda;
  p.cross_block_residual = c.model.cross_block_residual;
  p.use_mha = c.model.variant != Variant::crle;
  p.use_residual = c.model.variant != Variant::cale;
  return p;
}

inline bool uses_forest(const ExperimentConfig& c) { return c.model.variant != Variant::carl; }

}  // namespace carle
