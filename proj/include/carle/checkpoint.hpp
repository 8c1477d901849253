#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "carle/config.hpp"
#include "carle/error.hpp"
#include "carle/pipeline.hpp"

namespace carle {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "carle-checkpoint";
inline constexpr const char* kCheckpointFile = "checkpoint.json";

namespace detail {

inline Json matrix_json(const Matrix& m) { return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

inline Matrix matrix_from(const Json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw InputError("checkpoint matrix data does not match its shape");
  return m;
}

inline Json mat_json(const nn::Mat& m) {
  return {{"shape", {m.rows(), m.cols()}}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline void mat_from(const Json& j, nn::Mat& m, const std::string& name) {
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  if (shape.size() != 2 || shape[0] != m.rows() || shape[1] != m.cols())
    throw InputError("checkpoint tensor " + name + " has shape " + j.at("shape").dump() + ", model expects [" +
                     std::to_string(m.rows()) + "," + std::to_string(m.cols()) + "]");
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != static_cast<std::size_t>(m.size())) throw InputError("checkpoint tensor " + name + " is truncated");
  std::copy(data.begin(), data.end(), m.data());
}

inline Json profile_json(const nn::ModelProfile& p) {
  return {{"name", p.name},
          {"input_width", p.input_width},
          {"seq_len", p.seq_len},
          {"conv_filters", p.conv_filters},
          {"kernel_sizes", p.kernel_sizes},
          {"pool_size", p.pool_size},
          {"heads", p.heads},
          {"key_dim", p.key_dim},
          {"lstm_units", p.lstm_units},
          {"dense_units", p.dense_units},
          {"l2_lambda", p.l2_lambda},
          {"use_mha", p.use_mha},
          {"use_residual", p.use_residual},
          {"cross_block_residual", p.cross_block_residual}};
}

inline nn::ModelProfile profile_from(const Json& j) {
  nn::ModelProfile p;
  p.name = j.at("name").get<std::string>();
  p.input_width = j.at("input_width").get<std::size_t>();
  p.seq_len = j.at("seq_len").get<std::size_t>();
  p.conv_filters = j.at("conv_filters").get<std::vector<std::size_t>>();
  p.kernel_sizes = j.at("kernel_sizes").get<std::vector<std::size_t>>();
  p.pool_size = j.at("pool_size").get<std::size_t>();
  p.heads = j.at("heads").get<std::size_t>();
  p.key_dim = j.at("key_dim").get<std::size_t>();
  p.lstm_units = j.at("lstm_units").get<std::vector<std::size_t>>();
  p.dense_units = j.at("dense_units").get<std::vector<std::size_t>>();
  p.l2_lambda = j.at("l2_lambda").get<double>();
  p.use_mha = j.at("use_mha").get<bool>();
  p.use_residual = j.at("use_residual").get<bool>();
  p.cross_block_residual = j.at("cross_block_residual").get<bool>();
  return p;
}

inline Json forest_json(const Forest& f) {
  Json trees = Json::array();
  for (const auto& t : f.trees()) {
    Json nodes = Json::array();
    for (const auto& n : t.nodes()) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value, n.samples});
    trees.push_back(std::move(nodes));
  }
  return {{"width", f.width()}, {"clamp_unit", f.clamp_unit()}, {"seeds", f.seeds()}, {"trees", std::move(trees)}};
}

inline Forest forest_from(const Json& j) {
  const auto width = j.at("width").get<std::size_t>();
  std::vector<RegressionTree> trees;
  for (const auto& jt : j.at("trees")) {
    std::vector<RegressionTree::Node> nodes;
    for (const auto& jn : jt) {
      RegressionTree::Node n;
      n.feature = jn.at(0).get<std::int32_t>();
      n.threshold = jn.at(1).get<double>();
      n.left = jn.at(2).get<std::int32_t>();
      n.right = jn.at(3).get<std::int32_t>();
      n.value = jn.at(4).get<double>();
      n.samples = jn.at(5).get<std::size_t>();
      nodes.push_back(n);
    }
    const auto count = static_cast<std::int32_t>(nodes.size());
    if (count == 0) throw InputError("checkpoint forest holds an empty tree");
    for (const auto& n : nodes)
      if (!n.is_leaf() && (n.feature >= static_cast<std::int32_t>(width) || n.left <= 0 || n.left >= count ||
                           n.right <= 0 || n.right >= count))
        throw InputError("checkpoint forest holds a malformed tree");
    trees.emplace_back(std::move(nodes), width);
  }
  return Forest(std::move(trees), j.at("seeds").get<std::vector<std::uint64_t>>(), width,
                j.at("clamp_unit").get<bool>());
}

}  // namespace detail

inline Json history_json(const nn::TrainReport& r) {
  Json h = Json::array();
  for (const auto& e : r.history)
    h.push_back({{"epoch", e.epoch},
                  {"loss", e.loss},
                  {"mae", e.mae},
                  {"val_loss", std::isfinite(e.val_loss) ? Json(e.val_loss) : Json()},
                  {"val_mae", std::isfinite(e.val_mae) ? Json(e.val_mae) : Json()},
                  {"learning_rate", e.learning_rate}});
  return h;
}

inline Json to_checkpoint(TrainedModel& m) {
  Json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config_hash"] = hash_hex(config_hash(m.config));
  j["config"] = to_json(m.config);
  j["profile"] = detail::profile_json(m.net.profile());
  j["feature_names"] = m.feature_names;
  j["normalizer"] = {{"mode", std::string(to_string(m.normalizer.mode))},
                     {"baseline_fraction", m.normalizer.baseline_fraction},
                     {"clip", m.normalizer.clip},
                     {"center", m.normalizer.center},
                     {"scale", m.normalizer.scale}};
  Json tensors = Json::array();
  m.net.visit([&](nn::Parameter& p) {
    Json t = detail::mat_json(p.value);
    t["name"] = p.name;
    tensors.push_back(std::move(t));
  });
  j["tensors"] = std::move(tensors);
  Json accum = Json::array();
  for (const auto& a : m.report.optimizer_state) accum.push_back(detail::mat_json(a));
  j["optimizer"] = {{"kind", "rmsprop"},
                    {"learning_rate", m.report.final_learning_rate},
                    {"rho", m.config.train.rho},
                    {"epsilon", m.config.train.epsilon},
                    {"accumulators", std::move(accum)}};
  j["training"] = {{"best_epoch", m.report.best_epoch},
                   {"best_loss", m.report.best_loss},
                   {"stopped_early", m.report.stopped_early},
                   {"lr_reductions", m.report.lr_reductions},
                   {"history", history_json(m.report)}};
  j["train_features"] = detail::matrix_json(m.train_features);
  j["train_logits"] = detail::matrix_json(m.train_logits);
  if (m.forest) j["forest"] = detail::forest_json(*m.forest);
  return j;
}

inline TrainedModel from_checkpoint(const Json& j) {
  try {
    if (j.value("format", std::string()) != kCheckpointFormat) throw InputError("not a CARLE checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw InputError("unsupported checkpoint version " + std::to_string(version) + " (expected " +
                       std::to_string(kCheckpointVersion) + ")");
    TrainedModel m;
    m.config = from_json(j.at("config"));
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    const auto& nj = j.at("normalizer");
    m.normalizer.mode = parse_normalization(nj.at("mode").get<std::string>());
    m.normalizer.baseline_fraction = nj.at("baseline_fraction").get<double>();
    m.normalizer.clip = nj.at("clip").get<double>();
    m.normalizer.center = nj.at("center").get<std::vector<double>>();
    m.normalizer.scale = nj.at("scale").get<std::vector<double>>();
    if (m.normalizer.center.size() != m.feature_names.size() || m.normalizer.scale.size() != m.feature_names.size())
      throw InputError("checkpoint normalizer width does not match its feature names");

    m.net = nn::CarleNet(detail::profile_from(j.at("profile")), 0);
    const auto& tensors = j.at("tensors");
    std::size_t i = 0;
    m.net.visit([&](nn::Parameter& p) {
      if (i >= tensors.size()) throw InputError("checkpoint is missing tensor " + p.name);
      const auto& t = tensors[i++];
      if (t.at("name").get<std::string>() != p.name)
        throw InputError("checkpoint tensor " + t.at("name").get<std::string>() + " found where " + p.name +
                         " was expected");
      detail::mat_from(t, p.value, p.name);
    });
    if (i != tensors.size()) throw InputError("checkpoint holds more tensors than the model");

    const auto& opt = j.at("optimizer");
    m.report.final_learning_rate = opt.at("learning_rate").get<double>();
    const auto params = m.net.parameters();
    const auto& acc = opt.at("accumulators");
    if (!acc.empty() && acc.size() != params.size()) throw InputError("checkpoint optimizer state is incomplete");
    for (std::size_t k = 0; k < acc.size(); ++k) {
      nn::Mat a = nn::Mat::Zero(params[k]->value.rows(), params[k]->value.cols());
      detail::mat_from(acc[k], a, params[k]->name + " accumulator");
      m.report.optimizer_state.push_back(std::move(a));
    }
    const auto& tr = j.at("training");
    m.report.best_epoch = tr.at("best_epoch").get<std::size_t>();
    m.report.best_loss = tr.at("best_loss").get<double>();
    m.report.stopped_early = tr.at("stopped_early").get<bool>();
    m.report.lr_reductions = tr.at("lr_reductions").get<std::size_t>();
    for (const auto& e : tr.at("history")) {
      nn::EpochRecord r;
      r.epoch = e.at("epoch").get<std::size_t>();
      r.loss = e.at("loss").get<double>();
      r.mae = e.at("mae").get<double>();
      if (!e.at("val_loss").is_null()) r.val_loss = e.at("val_loss").get<double>();
      if (!e.at("val_mae").is_null()) r.val_mae = e.at("val_mae").get<double>();
      r.learning_rate = e.at("learning_rate").get<double>();
      m.report.history.push_back(r);
    }
    m.train_features = detail::matrix_from(j.at("train_features"));
    m.train_logits = detail::matrix_from(j.at("train_logits"));
    if (j.contains("forest")) m.forest = detail::forest_from(j.at("forest"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("malformed checkpoint: ") + e.what());
  }
}

namespace detail {

inline Json read_json(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw InputError(std::string("cannot open ") + what + " '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string(what) + " '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << j.dump() << '\n';
}

}  // namespace detail

/// Writes `checkpoint.json` (network, optimizer state, history and, unless
/// the variant is CARL, the forest) into `dir`. Returns its path.
inline std::filesystem::path save_checkpoint(TrainedModel& m, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  detail::write_json(dir / kCheckpointFile, to_checkpoint(m));
  return dir / kCheckpointFile;
}

/// Accepts the checkpoint file or the directory holding it.
inline TrainedModel load_checkpoint(std::filesystem::path path) {
  if (std::filesystem::is_directory(path)) path /= kCheckpointFile;
  return from_checkpoint(detail::read_json(path, "checkpoint"));
}

}  // namespace carle
