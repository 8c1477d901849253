// carle: command-line front end for the bearing RUL pipeline.
//
// Exit codes: 0 success, 2 usage or input error, 3 numerical failure.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "carle/commands.hpp"

namespace {

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> profile;
  std::optional<std::string> variant;
  std::optional<double> fs;
  std::optional<std::size_t> epochs;
  bool quiet = false;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_file, "JSON config file")->check(CLI::ExistingFile);
    app->add_option("--set", sets, "override a config key, e.g. --set train.max_epochs=50")->take_all();
    app->add_option("--seed", seed, "root seed");
    app->add_option("--profile", profile, "model profile: toy, xjtu, pronostia");
    app->add_option("--variant", variant, "model variant: carle, carl, crle, cale");
    app->add_option("--fs", fs, "sample rate of raw-signal CSVs in Hz");
    app->add_option("--epochs", epochs, "maximum training epochs");
    app->add_flag("-q,--quiet", quiet, "suppress progress messages");
  }

  carle::ExperimentConfig resolve() const {
    carle::Json file;
    if (!config_file.empty()) file = carle::read_json_file(config_file);
    std::vector<carle::Json> patches;
    for (const auto& s : sets) patches.push_back(carle::parse_override(s));
    if (profile) patches.push_back({{"model", {{"profile", *profile}}}});
    if (variant) patches.push_back({{"model", {{"variant", *variant}}}});
    if (seed) patches.push_back({{"seed", *seed}});
    if (fs) patches.push_back({{"signal", {{"sample_rate_hz", *fs}}}});
    if (epochs) patches.push_back({{"train", {{"max_epochs", *epochs}}}});
    return carle::resolve_config(file, patches);
  }

  std::ostream* log() const { return quiet ? nullptr : &std::cerr; }
};

void add_source(CLI::App* app, carle::cmd::DataSource& src, const std::string& prefix, const std::string& what) {
  const std::string p = prefix.empty() ? "" : prefix + "-";
  app->add_option("--" + p + "input", src.raw, "raw-signal CSV(s) for " + what + ", one run per file")
      ->check(CLI::ExistingFile);
  app->add_option("--" + p + "features", src.features, "feature CSV for " + what)->check(CLI::ExistingFile);
  app->add_option("--" + p + "labels", src.labels, "single-column label CSV for " + what)->check(CLI::ExistingFile);
  app->add_option("--" + p + "shaft-hz", src.shaft_hz, "shaft frequency of the " + what + " recordings");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bearing remaining-useful-life estimation"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "generate synthetic run-to-failure recordings");
  std::string synth_out = "run.csv";
  std::size_t synth_count = 1;
  std::size_t synth_first = 0;
  double synth_shaft = 0.0;
  synth->add_option("-o,--out", synth_out, "output CSV (numbered when --count > 1)");
  synth->add_option("--count", synth_count, "number of runs")->check(CLI::PositiveNumber);
  synth->add_option("--first-run", synth_first, "index of the first run");
  synth->add_option("--shaft-hz", synth_shaft, "shaft frequency in Hz");
  common.attach(synth);

  auto* extract = app.add_subcommand("extract", "compute window features from raw signals");
  carle::cmd::DataSource extract_src;
  std::string extract_out = "features.csv";
  std::string extract_labels;
  add_source(extract, extract_src, "", "extraction");
  extract->add_option("-o,--out", extract_out, "feature CSV");
  extract->add_option("--labels-out", extract_labels, "label CSV to write alongside");
  common.attach(extract);

  auto* train = app.add_subcommand("train", "train a model and write checkpoint, metrics and history");
  carle::cmd::TrainArgs train_args;
  add_source(train, train_args.train, "", "training");
  add_source(train, train_args.validation, "val", "validation");
  add_source(train, train_args.test, "test", "held-out evaluation");
  train->add_option("-o,--out-dir", train_args.out_dir, "artifact directory");
  common.attach(train);

  auto* predict = app.add_subcommand("predict", "score data with a trained checkpoint");
  std::string predict_ckpt;
  carle::cmd::DataSource predict_src;
  std::string predict_out = "predictions.csv";
  std::string predict_metrics;
  predict->add_option("--checkpoint", predict_ckpt, "checkpoint file or directory")->required();
  add_source(predict, predict_src, "", "scoring");
  predict->add_option("-o,--out", predict_out, "prediction CSV");
  predict->add_option("--metrics", predict_metrics, "metrics JSON");
  predict->add_flag("-q,--quiet", common.quiet, "suppress progress messages");

  auto* ablate = app.add_subcommand("ablate", "train CARLE, CARL, CRLE and CALE and compare them");
  carle::cmd::TrainArgs ablate_args;
  std::string ablate_out = "ablation.csv";
  add_source(ablate, ablate_args.train, "", "training");
  add_source(ablate, ablate_args.test, "test", "held-out evaluation");
  ablate->add_option("-o,--out", ablate_out, "comparison CSV");
  common.attach(ablate);

  auto* noise = app.add_subcommand("noise", "evaluate a checkpoint on clean and corrupted signals");
  std::string noise_ckpt;
  carle::cmd::DataSource noise_src;
  std::string noise_out = "noise.json";
  std::optional<double> g_mean, g_std, sp_fraction, sp_amplitude;
  std::optional<std::uint64_t> noise_seed;
  noise->add_option("--checkpoint", noise_ckpt, "checkpoint file or directory")->required();
  add_source(noise, noise_src, "", "evaluation");
  noise->add_option("--gaussian-mean", g_mean, "gaussian noise mean");
  noise->add_option("--gaussian-std", g_std, "gaussian noise standard deviation");
  noise->add_option("--sp-fraction", sp_fraction, "salt-and-pepper fraction of samples");
  noise->add_option("--sp-amplitude", sp_amplitude, "salt-and-pepper excursion beyond the channel range");
  noise->add_option("--seed", noise_seed, "noise seed");
  noise->add_option("-o,--out", noise_out, "report JSON");
  noise->add_flag("-q,--quiet", common.quiet, "suppress progress messages");

  auto* cross = app.add_subcommand("crossdomain", "evaluate with and without PCA+CORAL alignment");
  std::string cross_ckpt;
  carle::cmd::DataSource cross_src;
  std::string cross_out = "crossdomain.json";
  std::optional<std::size_t> pca_k;
  std::optional<double> ridge;
  bool logit_space = false;
  cross->add_option("--checkpoint", cross_ckpt, "source-trained checkpoint")->required();
  add_source(cross, cross_src, "", "target-domain");
  cross->add_option("--pca-components", pca_k, "PCA components (0 = all)");
  cross->add_option("--ridge", ridge, "covariance ridge");
  cross->add_flag("--logit-space", logit_space, "align logit vectors instead of features");
  cross->add_option("-o,--out", cross_out, "report JSON");
  cross->add_flag("-q,--quiet", common.quiet, "suppress progress messages");

  auto* snr = app.add_subcommand("snr-sweep", "SNR of Gaussian smoothing across sigma values");
  std::string snr_in;
  std::vector<double> sigmas{0.5, 0.75, 1.0, 1.5, 2.0, 3.0};
  std::string snr_out = "snr.csv";
  snr->add_option("--input", snr_in, "raw-signal CSV")->required()->check(CLI::ExistingFile);
  snr->add_option("--sigmas", sigmas, "strictly increasing sigma values")->delimiter(',');
  snr->add_option("-o,--out", snr_out, "sweep CSV");
  common.attach(snr);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    auto* log = common.log();
    if (*synth) {
      for (const auto& p : carle::cmd::synth(common.resolve(), synth_out, synth_count, synth_shaft, synth_first))
        if (log) *log << "wrote " << p << '\n';
    } else if (*extract) {
      carle::cmd::extract(common.resolve(), extract_src, extract_out, extract_labels, log);
    } else if (*train) {
      const auto m = carle::cmd::train(common.resolve(), train_args, log);
      std::cout << m.dump(2) << '\n';
    } else if (*predict) {
      std::cout << carle::cmd::predict(predict_ckpt, predict_src, predict_out, predict_metrics, log).dump(2) << '\n';
    } else if (*ablate) {
      const auto cfg = common.resolve();
      for (const auto& r : carle::cmd::ablate(cfg, ablate_args, ablate_out, log))
        std::cout << carle::to_string(r.variant) << " params=" << r.parameters << " mae=" << r.report.mae
                  << " rmse=" << r.report.rmse << " score=" << r.report.score << '\n';
    } else if (*noise) {
      auto model_cfg = carle::load_checkpoint(noise_ckpt).config;
      auto params = model_cfg.noise;
      if (g_mean) params.mean = *g_mean;
      if (g_std) params.std = *g_std;
      if (sp_fraction) params.fraction = *sp_fraction;
      if (sp_amplitude) params.amplitude = *sp_amplitude;
      const auto seed = noise_seed.value_or(model_cfg.seed);
      std::cout << carle::cmd::noise(noise_ckpt, noise_src, params, seed, noise_out, log).dump(2) << '\n';
    } else if (*cross) {
      auto adapt = carle::load_checkpoint(cross_ckpt).config.adapt;
      if (pca_k) adapt.pca_components = *pca_k;
      if (ridge) adapt.ridge = *ridge;
      if (logit_space) adapt.logit_space = true;
      std::cout << carle::cmd::crossdomain(cross_ckpt, cross_src, adapt, cross_out, log).dump(2) << '\n';
    } else if (*snr) {
      for (const auto& p : carle::cmd::snr(common.resolve(), snr_in, sigmas, snr_out))
        std::cout << "sigma=" << p.sigma << " snr_db=" << p.snr_db << '\n';
    }
  } catch (const carle::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const carle::ParameterError& e) {
    std::cerr << "invalid parameter: " << e.what() << '\n';
    return 2;
  } catch (const carle::InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const carle::DegenerateWindowError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
