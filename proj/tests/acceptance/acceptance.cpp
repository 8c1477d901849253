// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/fixtures.hpp"
#include "../unit/gradcheck.hpp"
#include "carle/adapt.hpp"
#include "carle/checkpoint.hpp"
#include "carle/cwt.hpp"
#include "carle/features.hpp"
#include "carle/forest.hpp"
#include "carle/metrics.hpp"
#include "carle/pipeline.hpp"

namespace {

using namespace carle;
namespace fs = std::filesystem;

// Pinned tolerances and budgets.
constexpr double kGradTol = 1e-4;
constexpr double kGradSeconds = 60.0;
constexpr std::size_t kTones = 20;
constexpr std::size_t kTonesRequired = 19;
constexpr double kToneSeconds = 30.0;
constexpr double kEnergyRatioTol = 1e-9;
constexpr double kKurtosisTol = 0.3;
constexpr double kSkewTol = 0.05;
constexpr double kScoreTol = 1e-12;
constexpr double kCoralTol = 1e-6;
constexpr double kOrthoTol = 1e-8;
constexpr double kOverfitRmse = 0.05;
constexpr std::size_t kOverfitEpochs = 500;
constexpr double kOverfitCpuSeconds = 300.0;
constexpr double kTransferMae = 0.15;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// C1 -------------------------------------------------------------------------

Outcome gradient_fidelity() {
  using namespace carle::nn;
  using carle::testing::check_layer;
  using carle::testing::random_mat;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  carle::testing::GradCheck all;
  auto biased = [&](auto& layer) {
    layer.init(rng);
    layer.visit([&](Parameter& p) {
      if (!p.regularized && p.value.rows() == 1) p.value = random_mat(1, p.value.cols(), rng, 0.3);
    });
  };
  {
    Dense d("dense", 5, 3);
    biased(d);
    all.merge(check_layer(d, random_mat(4, 5, rng), rng));
  }
  for (std::size_t k : {1u, 2u, 3u, 4u}) {
    Conv1d c("conv", 3, 2, k);
    biased(c);
    all.merge(check_layer(c, random_mat(6, 3, rng), rng));
  }
  {
    MultiHeadAttention m("mha", 4, 2, 3);
    biased(m);
    all.merge(check_layer(m, random_mat(5, 4, rng), rng));
  }
  {
    Lstm l("lstm", 3, 4);
    biased(l);
    all.merge(check_layer(l, random_mat(6, 3, rng), rng));
  }
  {
    ResidualConvUnit u("res_conv", 3, 2, 3, 2, true);
    biased(u);
    all.merge(check_layer(u, random_mat(8, 3, rng), rng));
  }
  {
    ResidualConvUnit u("res_conv_id", 3, 3, 2, 1, true);
    biased(u);
    all.merge(check_layer(u, random_mat(5, 3, rng), rng));
  }
  {
    ResidualLstmUnit u("res_lstm", 3, 4, true);
    biased(u);
    all.merge(check_layer(u, random_mat(5, 3, rng), rng));
  }
  {
    AttentionUnit a("attn", 4, 2, 2, true);
    biased(a);
    all.merge(check_layer(a, random_mat(3, 4, rng), rng));
  }
  {
    CarleNet net(ModelProfile::toy(6, 4), 3);
    carle::testing::randomize_biases(net, rng);
    const auto batch = carle::testing::random_batch(2, 4, 6, rng);
    all.merge(carle::testing::check_network(net, batch, {0.2, 0.9}));
    all.merge(carle::testing::check_network_input(net, batch.sample(0)));
  }
  const double secs = seconds_since(t0);
  return {all.max_rel_error < kGradTol && secs < kGradSeconds,
          "max rel err " + fmt("%.2e", all.max_rel_error) + " over " + std::to_string(all.checked) + " entries, " +
              fmt("%.1f", secs) + " s"};
}

// C2 -------------------------------------------------------------------------

Outcome frequency_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const double shaft = 35.0;
  const double fs = 2000.0;
  const auto grid = build_scale_grid(shaft, fs);
  const double bin = std::log(grid.scales[1] / grid.scales[0]);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> log_f(std::log(shaft / 3.0), std::log(3.0 * shaft));
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::size_t hits = 0;
  double worst = 0.0;
  for (std::size_t k = 0; k < kTones; ++k) {
    const double f = std::exp(log_f(rng));
    const double ph = phase(rng);
    std::vector<double> x(1024);
    for (std::size_t i = 0; i < x.size(); ++i)
      x[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) / fs + ph);
    const double got = dominant_frequency(energy(transform(x, grid)).per_scale, grid);
    const double err = std::abs(std::log(got / f)) / bin;
    worst = std::max(worst, err);
    hits += err <= 1.0 + 1e-9;
  }
  const double secs = seconds_since(t0);
  return {hits >= kTonesRequired && secs < kToneSeconds,
          std::to_string(hits) + "/" + std::to_string(kTones) + " within one bin (worst " + fmt("%.2f", worst) +
              " bins), " + fmt("%.1f", secs) + " s"};
}

// C3 -------------------------------------------------------------------------

Outcome feature_invariants() {
  bool ok = true;
  std::ostringstream why;
  const std::size_t n = 64;
  const std::vector<double> flat(n, 2.5);
  std::vector<double> spike(n, 0.0);
  spike[17] = 3.0;
  const double h_max = entropy(flat);
  const double h_min = entropy(spike);
  ok = ok && std::abs(h_max - std::log(static_cast<double>(n))) < 1e-12 && h_min == 0.0;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> e(n);
    for (double& v : e) v = u(rng) * u(rng);
    const double h = entropy(e);
    ok = ok && h >= 0.0 && h <= std::log(static_cast<double>(n)) + 1e-12;
  }
  why << "entropy [" << h_min << ", " << fmt("%.12f", h_max) << "]";

  const auto grid = build_scale_grid(35.0, 2000.0, 32);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_ratio = 0.0;
  for (int t = 0; t < 5; ++t) {
    std::vector<double> x(256), x2(256);
    for (std::size_t i = 0; i < x.size(); ++i) {
      x[i] = g(rng);
      x2[i] = 2.0 * x[i];
    }
    const double r = energy(transform(x2, grid)).total / energy(transform(x, grid)).total;
    worst_ratio = std::max(worst_ratio, std::abs(r - 4.0));
  }
  ok = ok && worst_ratio < kEnergyRatioTol;
  why << ", |ratio-4| " << fmt("%.1e", worst_ratio);

  std::vector<double> sample(100000);
  for (double& v : sample) v = g(rng);
  const auto m = moments(sample);
  ok = ok && std::abs(m.kurtosis - 3.0) < kKurtosisTol && std::abs(m.skewness) < kSkewTol;
  why << ", kurtosis " << fmt("%.4f", m.kurtosis) << ", skewness " << fmt("%.4f", m.skewness);
  return {ok, why.str()};
}

// C4 -------------------------------------------------------------------------

Outcome metric_identities() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  std::uniform_int_distribution<int> len(1, 50);
  bool order = true;
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> y(static_cast<std::size_t>(len(rng))), p(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = u(rng);
      p[i] = u(rng);
    }
    order = order && mae(y, p) <= rmse(y, p);
  }
  const std::vector<double> truth{0.5};
  const double early = phm_score(truth, std::vector<double>{0.5 - 13.0});
  const double late = phm_score(truth, std::vector<double>{0.5 + 10.0});
  const double exact = phm_score(truth, truth);
  const double e1 = std::numbers::e - 1.0;
  const bool ok = order && std::abs(early - e1) < kScoreTol && std::abs(late - e1) < kScoreTol && exact == 0.0;
  return {ok, std::string("mae<=rmse ") + (order ? "1000/1000" : "violated") + ", score(-13) " +
                  fmt("%.15f", early) + ", score(+10) " + fmt("%.15f", late) + ", score(0) " + fmt("%g", exact)};
}

// C5 -------------------------------------------------------------------------

double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double acc = 0.0;
  for (double a : v) acc += (a - m) * (a - m);
  return acc;
}

double split_sse(const Matrix& x, const std::vector<double>& y, const std::vector<std::size_t>& rows, std::size_t f,
                 double thr) {
  std::vector<double> l, r;
  for (auto i : rows) (x(i, f) <= thr ? l : r).push_back(y[i]);
  if (l.empty() || r.empty()) return std::numeric_limits<double>::infinity();
  return sse(l) + sse(r);
}

double brute_best(const Matrix& x, const std::vector<double>& y, const std::vector<std::size_t>& rows) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < x.cols; ++f) {
    std::vector<double> vals;
    for (auto i : rows) vals.push_back(x(i, f));
    std::sort(vals.begin(), vals.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k)
      if (vals[k] < vals[k + 1]) best = std::min(best, split_sse(x, y, rows, f, vals[k]));
  }
  return best;
}

bool node_matches(const RegressionTree& tree, std::size_t id, const Matrix& x, const std::vector<double>& y,
                  const std::vector<std::size_t>& rows, std::size_t depth, std::size_t max_depth) {
  const auto& node = tree.nodes()[id];
  std::vector<double> ys;
  for (auto i : rows) ys.push_back(y[i]);
  if (node.is_leaf()) {
    const double mean = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    const bool could_split = depth < max_depth && sse(ys) > 0.0 && std::isfinite(brute_best(x, y, rows));
    return std::abs(node.value - mean) < 1e-12 && !could_split;
  }
  if (depth >= max_depth) return false;
  const auto f = static_cast<std::size_t>(node.feature);
  std::vector<std::size_t> left, right;
  for (auto i : rows) (x(i, f) <= node.threshold ? left : right).push_back(i);
  if (left.empty() || right.empty()) return false;
  const double best = brute_best(x, y, rows);
  if (std::abs(split_sse(x, y, rows, f, node.threshold) - best) > 1e-12 * (1.0 + best)) return false;
  return node_matches(tree, static_cast<std::size_t>(node.left), x, y, left, depth + 1, max_depth) &&
         node_matches(tree, static_cast<std::size_t>(node.right), x, y, right, depth + 1, max_depth);
}

Outcome forest_oracle() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> small(0, 3);
  std::size_t total = 0, matched = 0;
  for (std::size_t n = 2; n <= 8; ++n)
    for (std::size_t d = 1; d <= 3; ++d)
      for (std::size_t depth = 1; depth <= 2; ++depth)
        for (int rep = 0; rep < 12; ++rep) {
          const bool ties = rep % 3 == 0;
          Matrix x(n, d);
          std::vector<double> y(n);
          for (double& v : x.data) v = ties ? small(rng) : u(rng);
          for (double& v : y) v = ties ? small(rng) : u(rng);
          std::vector<std::size_t> rows(n);
          std::iota(rows.begin(), rows.end(), std::size_t{0});
          std::mt19937_64 tree_rng(static_cast<std::uint64_t>(rep));
          const auto tree = RegressionTree::fit(x, y, rows, TreeConfig{0, 1, depth}, tree_rng);
          ++total;
          matched += node_matches(tree, 0, x, y, rows, 0, depth);
        }

  Matrix x(60, 4);
  std::vector<double> y(60);
  for (double& v : x.data) v = u(rng);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x(i, 0) + 0.3 * x(i, 2) * x(i, 3);
  const auto forest = Forest::fit(x, y, ForestConfig{25, 2, 1, 0, true, false}, 9);
  bool mean_exact = true;
  for (std::size_t r = 0; r < x.rows; ++r) {
    double sum = 0.0;
    for (const auto& t : forest.trees()) sum += t.predict(x.row(r));
    mean_exact = mean_exact && forest.predict_row(x.row(r)) == sum / static_cast<double>(forest.trees().size());
  }
  return {matched == total && mean_exact, std::to_string(matched) + "/" + std::to_string(total) +
                                              " trees match brute force, forest mean " +
                                              (mean_exact ? "exact" : "differs")};
}

// C6 -------------------------------------------------------------------------

Outcome coral_and_pca() {
  using adapt::Mat;
  std::mt19937_64 rng(6);
  std::normal_distribution<double> g(0.0, 1.0);
  auto draw = [&](Eigen::Index r, Eigen::Index c) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
  };
  double worst_coral = 0.0;
  double worst_ortho = 0.0;
  for (int t = 0; t < 10; ++t) {
    const Eigen::Index d = 3 + t % 5;
    const Mat mix_s = Mat::Identity(d, d) + 0.4 * draw(d, d);
    const Mat mix_t = Mat::Identity(d, d) + 0.4 * draw(d, d);
    const Mat s = draw(400, d) * mix_s;
    const Mat tg = (draw(300, d) * mix_t).rowwise() + draw(1, d).row(0);
    const auto tr = adapt::coral_fit(s, tg, 0.0);
    const Mat ct = adapt::covariance(tg);
    worst_coral = std::max(worst_coral, (adapt::covariance(adapt::coral_apply(tr, s)) - ct).norm() / ct.norm());
    const auto pca = adapt::pca_fit(s, static_cast<std::size_t>(d));
    const Mat gram = pca.components * pca.components.transpose();
    worst_ortho = std::max(worst_ortho, (gram - Mat::Identity(d, d)).cwiseAbs().maxCoeff());
  }
  return {worst_coral < kCoralTol && worst_ortho < kOrthoTol,
          "covariance mismatch " + fmt("%.2e", worst_coral) + ", orthonormality " + fmt("%.2e", worst_ortho)};
}

// C7 -------------------------------------------------------------------------

Outcome overfit_capacity() {
  const std::clock_t c0 = std::clock();
  const auto c = carle::testing::desk_config();
  const auto data = carle::testing::overfit_dataset(c);
  nn::CarleNet net(nn::ModelProfile::toy(data.x.dim(2), data.x.dim(1)), 1);
  nn::TrainConfig tc;
  tc.max_epochs = kOverfitEpochs;
  tc.early_stopping_patience = 100;
  const auto r = nn::train(net, data, tc);
  const double rmse_after = rmse(data.y, nn::predict(net, data.x));
  const double cpu = static_cast<double>(std::clock() - c0) / CLOCKS_PER_SEC;
  return {data.size() == 50 && rmse_after < kOverfitRmse && r.history.size() <= kOverfitEpochs &&
              cpu < kOverfitCpuSeconds,
          "RMSE " + fmt("%.4f", rmse_after) + " on " + std::to_string(data.size()) + " windows after " +
              std::to_string(r.history.size()) + " epochs, " + fmt("%.1f", cpu) + " s CPU"};
}

// C8 -------------------------------------------------------------------------

Outcome transfer_generalization() {
  std::vector<double> maes;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ExperimentConfig c;
    c.seed = seed;
    c.synth.duration_s = 20.0;
    const auto train = carle::testing::synthetic_features(c, 35.0, 4);
    const auto test = carle::testing::synthetic_features(c, 40.0, 2, 100);
    const auto labels = table_labels(train, c.label_scheme, c.knee);
    const auto test_labels = table_labels(test, c.label_scheme, c.knee);
    auto m = fit_model(train, labels, c);
    maes.push_back(mae(test_labels, predict(m, test)));
  }
  auto sorted = maes;
  std::sort(sorted.begin(), sorted.end());
  const double median = sorted[2];
  std::string all;
  for (double v : maes) all += (all.empty() ? "" : " ") + fmt("%.4f", v);
  return {median < kTransferMae, "median held-out MAE " + fmt("%.4f", median) + " (seeds: " + all + ")"};
}

// C9, C10 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Workspace {
  fs::path root;
  std::vector<std::string> train_runs;
  Workspace() : root(fs::temp_directory_path() / "carle_acceptance") {
    fs::remove_all(root);
    fs::create_directories(root);
    auto c = carle::testing::desk_config();
    train_runs = cmd::synth(c, (root / "run.csv").string(), 2);
  }
  ~Workspace() { fs::remove_all(root); }
};

Outcome determinism(const Workspace& w) {
  auto c = carle::testing::desk_config(11);
  c.train.max_epochs = 20;
  cmd::TrainArgs a;
  a.train.raw = w.train_runs;
  a.out_dir = (w.root / "det_a").string();
  cmd::train(c, a);
  a.out_dir = (w.root / "det_b").string();
  cmd::train(c, a);
  const auto ma = slurp(w.root / "det_a" / "metrics.json");
  const auto mb = slurp(w.root / "det_b" / "metrics.json");
  return {!ma.empty() && ma == mb, std::to_string(ma.size()) + " bytes, " + (ma == mb ? "identical" : "different")};
}

std::size_t subset_params(nn::CarleNet& net, const std::function<bool(const std::string&)>& keep) {
  std::size_t n = 0;
  net.visit([&](nn::Parameter& p) {
    if (keep(p.name)) n += p.size();
  });
  return n;
}

Outcome ablation_plumbing(const Workspace& w) {
  bool counts = true;
  std::ostringstream why;
  for (const char* name : {"toy", "xjtu", "pronostia"}) {
    auto base = nn::ModelProfile::named(name, 14, 8);
    auto no_res = base;
    no_res.use_residual = false;
    auto no_mha = base;
    no_mha.use_mha = false;
    nn::CarleNet carle(base, 0), cale(no_res, 0), crle(no_mha, 0);
    std::size_t attention = 0;
    for (auto* a : {&carle.conv_attention(), &carle.lstm_attention()})
      if (*a) (*a)->visit([&](nn::Parameter& p) { attention += p.size(); });
    const std::size_t projection = subset_params(carle, [](const std::string& n) {
      return n.find(".skip") != std::string::npos || n.rfind("cross", 0) == 0;
    });
    const std::size_t total = carle.parameter_count();
    counts = counts && projection > 0 && attention > 0 && total == cale.parameter_count() + projection &&
             total == crle.parameter_count() + attention;
    why << name << " " << total << "=" << cale.parameter_count() << "+" << projection << "=" << crle.parameter_count()
        << "+" << attention << "; ";
  }

  auto c = carle::testing::desk_config(12);
  c.train.max_epochs = 5;
  c.model.variant = Variant::carl;
  cmd::TrainArgs a;
  a.train.raw = w.train_runs;
  a.out_dir = (w.root / "carl").string();
  cmd::train(c, a);
  const auto ckpt = Json::parse(slurp(w.root / "carl" / kCheckpointFile));
  bool forest_free = !ckpt.contains("forest");
  for (const auto& e : fs::directory_iterator(w.root / "carl"))
    forest_free = forest_free && e.path().filename().string().find("forest") == std::string::npos;
  c.model.variant = Variant::carle;
  a.out_dir = (w.root / "carle").string();
  cmd::train(c, a);
  const bool carle_has_forest = Json::parse(slurp(w.root / "carle" / kCheckpointFile)).contains("forest");
  why << "CARL forest-free " << (forest_free ? "yes" : "no") << ", CARLE forest " << (carle_has_forest ? "yes" : "no");
  return {counts && forest_free && carle_has_forest, why.str()};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> run;
  };
  Workspace w;
  const std::vector<Criterion> criteria{
      {"C1", "gradient fidelity", gradient_fidelity},
      {"C2", "CWT frequency recovery", frequency_recovery},
      {"C3", "feature invariants", feature_invariants},
      {"C4", "metric identities", metric_identities},
      {"C5", "forest oracle", forest_oracle},
      {"C6", "CORAL and PCA post-conditions", coral_and_pca},
      {"C7", "overfit capacity", overfit_capacity},
      {"C8", "cross-condition generalization", transfer_generalization},
      {"C9", "determinism", [&] { return determinism(w); }},
      {"C10", "ablation plumbing", [&] { return ablation_plumbing(w); }},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %-4s %-32s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
