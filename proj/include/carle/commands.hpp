#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "carle/checkpoint.hpp"
#include "carle/config.hpp"
#include "carle/csv.hpp"
#include "carle/dataset.hpp"
#include "carle/features.hpp"
#include "carle/metrics.hpp"
#include "carle/pipeline.hpp"
#include "carle/signal.hpp"

namespace carle::cmd {

namespace fs = std::filesystem;

/// Where a labelled feature table comes from: raw-signal CSVs (one run per
/// file) or a feature CSV, with labels generated unless a label CSV is given.
struct DataSource {
  std::vector<std::string> raw;
  std::string features;
  std::string labels;
  double shaft_hz = 0.0;  // 0 keeps extraction.shaft_hz

  bool empty() const { return raw.empty() && features.empty(); }
};

struct LabelledTable {
  FeatureTable table;
  std::vector<double> labels;
};

inline std::string hash_of(const ExperimentConfig& c) { return hash_hex(config_hash(c)); }

inline MultiChannelSignal read_signal(const std::string& path, double sample_rate_hz) {
  return csv::to_signal(csv::read(path), sample_rate_hz);
}

inline FeatureTable extract_runs(const std::vector<std::string>& paths, const ExperimentConfig& c, double shaft_hz,
                                 std::ostream* log = nullptr) {
  auto ec = c.extraction;
  if (shaft_hz > 0.0) ec.shaft_hz = shaft_hz;
  FeatureTable t;
  for (std::size_t r = 0; r < paths.size(); ++r) {
    const auto signal = read_signal(paths[r], c.sample_rate_hz);
    WarningSink warn = nullptr;
    if (log) warn = [log, &paths, r](const std::string& m) { *log << "warning: " << paths[r] << ": " << m << '\n'; };
    const auto set = extract_features(signal, ec, warn);
    if (t.names.empty()) t.names = set.names;
    if (set.names != t.names) throw InputError(paths[r] + ": channel count differs from the first input");
    t.append(to_run(set, r));
  }
  return t;
}

inline LabelledTable load(const DataSource& src, const ExperimentConfig& c, std::ostream* log = nullptr) {
  if (!src.raw.empty() && !src.features.empty())
    throw InputError("give either raw-signal inputs or a feature CSV, not both");
  if (src.empty()) throw InputError("no input data given");
  LabelledTable out;
  out.table = src.raw.empty() ? csv::to_feature_table(csv::read(src.features), src.features)
                              : extract_runs(src.raw, c, src.shaft_hz, log);
  if (out.table.rows() == 0) throw InputError("input holds no usable windows");
  if (!src.labels.empty()) {
    out.labels = csv::to_labels(csv::read(src.labels), src.labels);
    if (out.labels.size() != out.table.rows())
      throw InputError(src.labels + ": " + std::to_string(out.labels.size()) + " labels for " +
                       std::to_string(out.table.rows()) + " feature rows");
  } else {
    out.labels = table_labels(out.table, c.label_scheme, c.knee);
  }
  return out;
}

inline Json report_json(const MetricReport& r) {
  return {{"n", r.n}, {"mae", r.mae}, {"rmse", r.rmse}, {"mse_alias", r.rmse}, {"score", r.score}};
}

inline void write_json(const fs::path& path, const Json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

inline void write_predictions(const fs::path& path, const LabelledTable& data, const std::vector<double>& pred,
                              const std::string& hash) {
  csv::Table t;
  t.comments.push_back("config_hash=" + hash);
  t.header = {"run", "window_index", "y_true", "y_pred"};
  std::size_t i = 0;
  for (const auto& r : data.table.runs)
    for (std::size_t w : r.window_index) {
      t.rows.push_back({static_cast<double>(r.run), static_cast<double>(w), data.labels[i], pred[i]});
      ++i;
    }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  csv::write(path.string(), t);
}

inline void write_history(const fs::path& path, const nn::TrainReport& r, const std::string& hash) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "# config_hash=" << hash << '\n' << "epoch,loss,mae,val_loss,val_mae,learning_rate\n";
  for (const auto& e : r.history) {
    out << e.epoch << ',' << e.loss << ',' << e.mae << ',';
    if (std::isfinite(e.val_loss)) out << e.val_loss;
    out << ',';
    if (std::isfinite(e.val_mae)) out << e.val_mae;
    out << ',' << e.learning_rate << '\n';
  }
}

// synth -----------------------------------------------------------------------

inline DegradationProfile synth_profile(const ExperimentConfig& c, double shaft_hz) {
  DegradationProfile p;
  p.shaft_hz = shaft_hz > 0.0 ? shaft_hz : c.extraction.shaft_hz;
  p.sample_rate_hz = c.sample_rate_hz;
  p.duration_s = c.synth.duration_s;
  p.onset_fraction = c.synth.onset_fraction;
  p.growth_rate = c.synth.growth_rate;
  p.channel_count = c.synth.channel_count;
  p.noise_std = c.synth.noise_std;
  p.impact_amplitude = c.synth.impact_amplitude;
  p.wear_gain = c.synth.wear_gain;
  return p;
}

/// Writes `count` synthetic runs named `<stem>_<k>.csv` (or `out` itself for
/// a single run). Returns the written paths.
inline std::vector<std::string> synth(const ExperimentConfig& c, const std::string& out, std::size_t count = 1,
                                      double shaft_hz = 0.0, std::size_t first_run = 0) {
  const auto profile = synth_profile(c, shaft_hz);
  std::vector<std::string> written;
  const fs::path base(out);
  for (std::size_t k = 0; k < count; ++k) {
    const std::size_t run = first_run + k;
    const auto r = synth_run_to_failure(profile, subsystem_seed(c.seed, "synth") + run);
    auto t = csv::from_signal(r.signal);
    std::ostringstream meta;
    meta << std::setprecision(17);
    t.comments.push_back("config_hash=" + hash_of(c));
    meta << "shaft_hz=" << profile.shaft_hz;
    t.comments.push_back(meta.str());
    t.comments.push_back("sample_rate_hz=" + std::to_string(profile.sample_rate_hz));
    t.comments.push_back("run=" + std::to_string(run));
    t.comments.push_back("onset_time_s=" + std::to_string(r.metadata.onset_time_s));
    t.comments.push_back("failure_time_s=" + std::to_string(r.metadata.failure_time_s));
    fs::path path = base;
    if (count > 1) path = base.parent_path() / (base.stem().string() + "_" + std::to_string(run) + base.extension().string());
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    csv::write(path.string(), t);
    written.push_back(path.string());
  }
  return written;
}

// extract ---------------------------------------------------------------------

inline void extract(const ExperimentConfig& c, const DataSource& src, const std::string& out,
                    const std::string& labels_out = {}, std::ostream* log = nullptr) {
  const auto data = load(src, c, log);
  auto t = csv::from_table(data.table);
  t.comments.insert(t.comments.begin(), "config_hash=" + hash_of(c));
  if (fs::path(out).has_parent_path()) fs::create_directories(fs::path(out).parent_path());
  csv::write(out, t);
  if (!labels_out.empty()) {
    auto lt = csv::from_labels(data.labels);
    lt.comments.push_back("config_hash=" + hash_of(c));
    csv::write(labels_out, lt);
  }
}

// train -----------------------------------------------------------------------

struct TrainArgs {
  DataSource train;
  DataSource validation;
  DataSource test;
  std::string out_dir = "carle_out";
};

/// Training plus the artifact set: checkpoint (holding the forest unless the
/// variant is CARL), metrics JSON, history CSV and prediction CSV. The
/// metrics cover the training data and, when given, the held-out test data.
inline Json train(const ExperimentConfig& c, const TrainArgs& a, std::ostream* log = nullptr) {
  const auto data = load(a.train, c, log);
  std::optional<LabelledTable> val;
  if (!a.validation.empty()) val = load(a.validation, c, log);
  auto model = val ? fit_model(data.table, data.labels, c, &val->table, val->labels)
                   : fit_model(data.table, data.labels, c);

  const auto hash = hash_of(c);
  const fs::path dir(a.out_dir);
  save_checkpoint(model, dir);
  write_history(dir / "history.csv", model.report, hash);

  Json metrics;
  metrics["config_hash"] = hash;
  metrics["variant"] = std::string(to_string(c.model.variant));
  metrics["profile"] = c.model.profile;
  metrics["seed"] = c.seed;
  metrics["parameters"] = model.net.parameter_count();
  metrics["epochs_run"] = model.report.history.size();
  metrics["best_epoch"] = model.report.best_epoch;
  metrics["best_loss"] = model.report.best_loss;
  metrics["forest"] = model.forest.has_value();
  const auto train_pred = carle::predict(model, data.table);
  metrics["train"] = report_json(evaluate(data.labels, train_pred));
  if (!a.test.empty()) {
    const auto test = load(a.test, c, log);
    const auto pred = carle::predict(model, test.table);
    metrics["test"] = report_json(evaluate(test.labels, pred));
    write_predictions(dir / "predictions.csv", test, pred, hash);
  } else {
    write_predictions(dir / "predictions.csv", data, train_pred, hash);
  }
  write_json(dir / "metrics.json", metrics);
  return metrics;
}

// predict ---------------------------------------------------------------------

inline Json predict(const std::string& checkpoint, const DataSource& src, const std::string& out,
                    const std::string& metrics_out = {}, std::ostream* log = nullptr) {
  auto model = load_checkpoint(checkpoint);
  const auto data = load(src, model.config, log);
  const auto pred = carle::predict(model, data.table);
  const auto hash = hash_of(model.config);
  write_predictions(out, data, pred, hash);
  Json j{{"config_hash", hash}, {"variant", std::string(to_string(model.config.model.variant))},
         {"report", report_json(evaluate(data.labels, pred))}};
  if (!metrics_out.empty()) write_json(metrics_out, j);
  return j;
}

// ablate ----------------------------------------------------------------------

struct AblationRow {
  Variant variant;
  std::size_t parameters = 0;
  MetricReport report;
};

/// Trains the four variants under one seed and scores each on the test data.
inline std::vector<AblationRow> ablate(const ExperimentConfig& c, const TrainArgs& a, const std::string& out,
                                       std::ostream* log = nullptr) {
  const auto data = load(a.train, c, log);
  const auto test = load(a.test.empty() ? a.train : a.test, c, log);
  std::vector<AblationRow> rows;
  for (Variant v : {Variant::carle, Variant::carl, Variant::crle, Variant::cale}) {
    auto cv = c;
    cv.model.variant = v;
    if (log) *log << "training " << to_string(v) << '\n';
    auto m = fit_model(data.table, data.labels, cv);
    rows.push_back({v, m.net.parameter_count(), evaluate(test.labels, carle::predict(m, test.table))});
  }
  std::ofstream os(out);
  if (!os) throw InputError("cannot write '" + out + "'");
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "# config_hash=" << hash_of(c) << '\n';
  for (const auto& r : rows) os << "# parameters." << to_string(r.variant) << '=' << r.parameters << '\n';
  os << "variant,mae,rmse,score\n";
  for (const auto& r : rows) os << to_string(r.variant) << ',' << r.report.mae << ',' << r.report.rmse << ',' << r.report.score << '\n';
  return rows;
}

// noise -----------------------------------------------------------------------

/// Clean, gaussian and salt-and-pepper versions of the raw test signals
/// pushed through the full pipeline of a trained model.
inline Json noise(const std::string& checkpoint, const DataSource& src, const NoiseParams& params, std::uint64_t seed,
                  const std::string& out, std::ostream* log = nullptr) {
  if (src.raw.empty()) throw InputError("noise evaluation needs raw-signal inputs");
  auto model = load_checkpoint(checkpoint);
  auto c = model.config;
  c.noise = params;
  c.seed = seed;
  auto ec = c.extraction;
  if (src.shaft_hz > 0.0) ec.shaft_hz = src.shaft_hz;

  auto run_kind = [&](const char* kind) {
    FeatureTable t;
    for (std::size_t r = 0; r < src.raw.size(); ++r) {
      auto signal = read_signal(src.raw[r], c.sample_rate_hz);
      const auto stream = subsystem_seed(seed, "noise") + r;
      if (std::string(kind) == "gaussian") signal = inject_noise(signal, NoiseKind::gaussian, params, stream);
      if (std::string(kind) == "salt_pepper") signal = inject_noise(signal, NoiseKind::salt_pepper, params, stream);
      const auto set = extract_features(signal, ec, nullptr);
      if (t.names.empty()) t.names = set.names;
      t.append(to_run(set, r));
    }
    std::vector<double> labels;
    if (!src.labels.empty()) {
      labels = csv::to_labels(csv::read(src.labels), src.labels);
      if (labels.size() != t.rows()) throw InputError("label count does not match the windows under noise");
    } else {
      labels = table_labels(t, c.label_scheme, c.knee);
    }
    if (log) *log << "evaluated " << kind << '\n';
    return evaluate(labels, carle::predict(model, t));
  };

  Json j;
  j["config_hash"] = hash_of(c);
  j["noise"] = {{"gaussian_mean", params.mean},
                {"gaussian_std", params.std},
                {"salt_pepper_fraction", params.fraction},
                {"salt_pepper_amplitude", params.amplitude},
                {"seed", seed}};
  j["clean"] = report_json(run_kind("clean"));
  j["gaussian"] = report_json(run_kind("gaussian"));
  j["salt_pepper"] = report_json(run_kind("salt_pepper"));
  write_json(out, j);
  return j;
}

// crossdomain -----------------------------------------------------------------

inline Json crossdomain(const std::string& checkpoint, const DataSource& target, const AdaptConfig& adapt,
                        const std::string& out, std::ostream* log = nullptr) {
  auto model = load_checkpoint(checkpoint);
  auto c = model.config;
  c.adapt = adapt;
  const auto data = load(target, c, log);
  const auto plain = carle::predict(model, data.table);
  const auto aligned = predict_aligned(model, data.table, adapt);
  Json j;
  j["config_hash"] = hash_of(c);
  j["adapt"] = {{"pca_components", adapt.pca_components},
                {"ridge", adapt.ridge},
                {"space", adapt.logit_space ? "logits" : "features"}};
  j["without_coral"] = report_json(evaluate(data.labels, plain));
  j["with_coral"] = report_json(evaluate(data.labels, aligned));
  write_json(out, j);
  return j;
}

// snr-sweep -------------------------------------------------------------------

inline std::vector<SnrPoint> snr(const ExperimentConfig& c, const std::string& input, const std::vector<double>& sigmas,
                                 const std::string& out) {
  const auto signal = read_signal(input, c.sample_rate_hz);
  const auto points = snr_sweep(signal, sigmas);
  csv::Table t;
  t.comments.push_back("config_hash=" + hash_of(c));
  t.header = {"sigma", "snr_db"};
  for (const auto& p : points) t.rows.push_back({p.sigma, p.snr_db});
  csv::write(out, t);
  return points;
}

}  // namespace carle::cmd
