#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "carle/error.hpp"
#include "carle/nn/layers.hpp"

namespace carle::nn {

/// Row-major tensor of arbitrary rank.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0)
      : shape(std::move(s)), data(element_count(shape), fill) {}

  static std::size_t element_count(const std::vector<std::size_t>& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
  }

  std::size_t rank() const noexcept { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  /// Sample `b` of a rank-3 [batch, time, features] tensor as a T x F matrix.
  Mat sample(std::size_t b) const {
    const std::size_t t = shape.at(1);
    const std::size_t f = shape.at(2);
    return Eigen::Map<const Mat>(data.data() + b * t * f, static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f));
  }

  void set_sample(std::size_t b, const Mat& m) {
    const std::size_t t = shape.at(1);
    const std::size_t f = shape.at(2);
    Eigen::Map<Mat>(data.data() + b * t * f, static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)) = m;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Architecture hyperparameters of a CARLE network.
struct ModelProfile {
  std::string name = "toy";
  std::size_t input_width = 14;  // 7 features per sensor
  std::size_t seq_len = 4;       // windows per input sequence
  std::vector<std::size_t> conv_filters{8, 8, 4, 4};
  std::vector<std::size_t> kernel_sizes{3, 3, 2, 2};
  std::size_t pool_size = 1;
  std::size_t heads = 2;
  std::size_t key_dim = 4;
  std::vector<std::size_t> lstm_units{8, 8};
  std::vector<std::size_t> dense_units{16, 16, 8};
  double l2_lambda = 0.005;
  bool use_mha = true;
  bool use_residual = true;
  bool cross_block_residual = false;  // skip from the conv block output past the LSTM stack

  std::size_t logit_width() const { return dense_units.empty() ? 0 : dense_units.back(); }

  void validate() const {
    if (input_width == 0) throw ParameterError("model input width must be positive");
    if (seq_len == 0) throw ParameterError("model sequence length must be positive");
    if (conv_filters.empty() || conv_filters.size() != kernel_sizes.size())
      throw ParameterError("conv filters and kernel sizes must be non-empty and equally long");
    if (lstm_units.empty()) throw ParameterError("at least one LSTM layer is required");
    if (dense_units.empty()) throw ParameterError("at least one dense layer is required");
    if (pool_size == 0) throw ParameterError("pool size must be positive");
    std::size_t t = seq_len;
    for (std::size_t i = 0; i < conv_filters.size(); ++i) t /= pool_size;
    if (t == 0) throw ParameterError("pooling removes the whole sequence");
    if (use_mha && (heads == 0 || key_dim == 0)) throw ParameterError("attention needs heads and key_dim > 0");
    if (l2_lambda < 0.0) throw ParameterError("l2 lambda must be >= 0");
  }

  std::size_t pooled_len() const {
    std::size_t t = seq_len;
    for (std::size_t i = 0; i < conv_filters.size(); ++i) t /= pool_size;
    return t;
  }

  static ModelProfile toy(std::size_t width, std::size_t seq_len = 4) {
    ModelProfile p;
    p.input_width = width;
    p.seq_len = seq_len;
    return p;
  }

  static ModelProfile xjtu(std::size_t width, std::size_t seq_len = 8) {
    ModelProfile p;
    p.name = "xjtu";
    p.input_width = width;
    p.seq_len = seq_len;
    p.conv_filters = {256, 256, 128, 64};
    p.kernel_sizes = {3, 3, 2, 2};
    p.heads = 8;
    p.key_dim = 64;
    p.lstm_units = {64, 64};
    p.dense_units = {128, 64, 32};
    return p;
  }

  static ModelProfile pronostia(std::size_t width, std::size_t seq_len = 8) {
    ModelProfile p = xjtu(width, seq_len);
    p.name = "pronostia";
    p.conv_filters = {64, 64, 32, 32};
    p.dense_units = {64, 48, 32};
    return p;
  }

  static ModelProfile named(const std::string& name, std::size_t width, std::size_t seq_len) {
    if (name == "toy") return toy(width, seq_len);
    if (name == "xjtu") return xjtu(width, seq_len);
    if (name == "pronostia") return pronostia(width, seq_len);
    throw ParameterError("unknown model profile '" + name + "' (expected toy, xjtu or pronostia)");
  }
};

struct ForwardResult {
  Tensor logits;                  // [batch, logit_width]
  std::vector<double> prediction; // scalar head, one per sample
};

/// Res-CNN -> MHA -> Res-LSTM -> MHA -> flatten -> dense stack (logits) ->
/// width-1 head. Inputs are [batch, seq_len, input_width] tensors.
class CarleNet {
public:
  struct Tape {
    std::vector<ResidualConvUnit::Cache> conv;
    std::optional<AttentionUnit::Cache> conv_attention;
    Mat conv_out;
    std::vector<ResidualLstmUnit::Cache> lstm;
    Shortcut::Cache cross;
    std::optional<AttentionUnit::Cache> lstm_attention;
    Eigen::Index seq_rows = 0;
    Eigen::Index seq_cols = 0;
    std::vector<Dense::Cache> dense;
    std::vector<Mat> dense_out;
    Dense::Cache head;
    Mat logits;
    double prediction = 0.0;
  };

  CarleNet() = default;

  explicit CarleNet(ModelProfile profile, std::uint64_t seed = 0) : profile_(std::move(profile)) {
    profile_.validate();
    std::size_t width = profile_.input_width;
    for (std::size_t i = 0; i < profile_.conv_filters.size(); ++i) {
      conv_.emplace_back("cnn" + std::to_string(i), width, profile_.conv_filters[i], profile_.kernel_sizes[i],
                         profile_.pool_size, profile_.use_residual);
      width = profile_.conv_filters[i];
    }
    const std::size_t conv_width = width;
    if (profile_.use_mha)
      conv_attention_.emplace("cnn_mha", width, profile_.heads, profile_.key_dim, profile_.use_residual);
    for (std::size_t i = 0; i < profile_.lstm_units.size(); ++i) {
      lstm_.emplace_back("lstm" + std::to_string(i), width, profile_.lstm_units[i], profile_.use_residual);
      width = profile_.lstm_units[i];
    }
    if (profile_.use_residual && profile_.cross_block_residual) cross_.emplace("cross", conv_width, width);
    if (profile_.use_mha)
      lstm_attention_.emplace("lstm_mha", width, profile_.heads, profile_.key_dim, profile_.use_residual);
    width *= profile_.pooled_len();
    for (std::size_t i = 0; i < profile_.dense_units.size(); ++i) {
      dense_.emplace_back("dense" + std::to_string(i), width, profile_.dense_units[i]);
      width = profile_.dense_units[i];
    }
    head_ = Dense("head", width, 1);
    initialize(seed);
  }

  void initialize(std::uint64_t seed) {
    Rng rng(seed);
    for (auto& u : conv_) u.init(rng);
    if (conv_attention_) conv_attention_->init(rng);
    for (auto& u : lstm_) u.init(rng);
    if (cross_) cross_->init(rng);
    if (lstm_attention_) lstm_attention_->init(rng);
    for (auto& d : dense_) d.init(rng);
    head_.init(rng);
  }

  const ModelProfile& profile() const noexcept { return profile_; }

  template <class F>
  void visit(F&& f) {
    for (auto& u : conv_) u.visit(f);
    if (conv_attention_) conv_attention_->visit(f);
    for (auto& u : lstm_) u.visit(f);
    if (cross_) cross_->visit(f);
    if (lstm_attention_) lstm_attention_->visit(f);
    for (auto& d : dense_) d.visit(f);
    head_.visit(f);
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    visit([&](Parameter& p) { out.push_back(&p); });
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit([&](Parameter& p) { n += p.size(); });
    return n;
  }

  void zero_grad() {
    visit([](Parameter& p) { p.zero_grad(); });
  }

  /// One sequence (seq_len x input_width) through the network.
  double forward_sample(const Mat& x, Tape* tape, Mat* logits_out = nullptr) const {
    if (static_cast<std::size_t>(x.rows()) != profile_.seq_len ||
        static_cast<std::size_t>(x.cols()) != profile_.input_width)
      throw InputError("CARLE expects a sample of shape [" + std::to_string(profile_.seq_len) + " x " +
                       std::to_string(profile_.input_width) + "], got [" + std::to_string(x.rows()) + " x " +
                       std::to_string(x.cols()) + "]");
    Tape local;
    Tape& t = tape ? *tape : local;
    t.conv.resize(conv_.size());
    t.lstm.resize(lstm_.size());
    t.dense.resize(dense_.size());
    t.dense_out.resize(dense_.size());

    Mat h = x;
    for (std::size_t i = 0; i < conv_.size(); ++i) h = conv_[i].forward(h, &t.conv[i]);
    if (conv_attention_) {
      t.conv_attention.emplace();
      h = conv_attention_->forward(h, &*t.conv_attention);
    }
    t.conv_out = h;
    for (std::size_t i = 0; i < lstm_.size(); ++i) h = lstm_[i].forward(h, &t.lstm[i]);
    if (cross_) h += cross_->forward(t.conv_out, &t.cross);
    if (lstm_attention_) {
      t.lstm_attention.emplace();
      h = lstm_attention_->forward(h, &*t.lstm_attention);
    }
    t.seq_rows = h.rows();
    t.seq_cols = h.cols();
    Mat flat = Eigen::Map<const Mat>(h.data(), 1, h.size());
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      flat = dense_[i].forward(flat, &t.dense[i]);
      if (i + 1 < dense_.size()) flat = relu(flat);
      t.dense_out[i] = flat;
    }
    t.logits = flat;
    if (logits_out) *logits_out = flat;
    t.prediction = head_.forward(flat, &t.head)(0, 0);
    return t.prediction;
  }

  /// Backpropagates d(loss)/d(prediction) and d(loss)/d(logits) through a
  /// recorded tape, accumulating parameter gradients. Returns d(loss)/d(input).
  Mat backward_sample(const Tape& t, double d_prediction, const Mat* d_logits = nullptr) {
    Mat g = head_.backward(Mat::Constant(1, 1, d_prediction), t.head);
    if (d_logits) g += *d_logits;
    for (std::size_t i = dense_.size(); i-- > 0;) {
      if (i + 1 < dense_.size()) g = relu_backward(g, t.dense_out[i]);
      g = dense_[i].backward(g, t.dense[i]);
    }
    Mat dh = Eigen::Map<const Mat>(g.data(), t.seq_rows, t.seq_cols);
    if (lstm_attention_) dh = lstm_attention_->backward(dh, *t.lstm_attention);
    Mat d_conv_out = Mat::Zero(t.conv_out.rows(), t.conv_out.cols());
    if (cross_) d_conv_out += cross_->backward(dh, t.cross);
    for (std::size_t i = lstm_.size(); i-- > 0;) dh = lstm_[i].backward(dh, t.lstm[i]);
    dh += d_conv_out;
    if (conv_attention_) dh = conv_attention_->backward(dh, *t.conv_attention);
    for (std::size_t i = conv_.size(); i-- > 0;) dh = conv_[i].backward(dh, t.conv[i]);
    return dh;
  }

  void check_batch(const Tensor& batch) const {
    if (batch.rank() != 3 || batch.dim(1) != profile_.seq_len || batch.dim(2) != profile_.input_width) {
      std::string got = "[";
      for (std::size_t i = 0; i < batch.rank(); ++i) got += (i ? ", " : "") + std::to_string(batch.dim(i));
      throw InputError("CARLE expects a batch of shape [batch, " + std::to_string(profile_.seq_len) + ", " +
                       std::to_string(profile_.input_width) + "], got " + got + "]");
    }
  }

  ForwardResult forward(const Tensor& batch) const {
    check_batch(batch);
    const std::size_t n = batch.dim(0);
    ForwardResult r{Tensor({n, profile_.logit_width()}), std::vector<double>(n)};
    Mat logits;
    for (std::size_t b = 0; b < n; ++b) {
      r.prediction[b] = forward_sample(batch.sample(b), nullptr, &logits);
      std::copy(logits.data(), logits.data() + logits.size(), r.logits.data.begin() + b * profile_.logit_width());
    }
    return r;
  }

  /// L2 penalty (lambda / 2) * sum ||W||^2 over regularized (conv) kernels.
  double l2_penalty() {
    double acc = 0.0;
    visit([&](Parameter& p) {
      if (p.regularized) acc += p.value.squaredNorm();
    });
    return 0.5 * profile_.l2_lambda * acc;
  }

  /// Sum-reduced squared error plus the L2 penalty; gradients are left in
  /// each Parameter::grad (previous contents are discarded).
  double compute_gradients(const Tensor& batch, std::span<const double> targets) {
    check_batch(batch);
    if (targets.size() != batch.dim(0))
      throw InputError("batch has " + std::to_string(batch.dim(0)) + " samples but " +
                       std::to_string(targets.size()) + " targets");
    zero_grad();
    double loss = 0.0;
    Tape tape;
    for (std::size_t b = 0; b < batch.dim(0); ++b) {
      const double pred = forward_sample(batch.sample(b), &tape);
      const double err = pred - targets[b];
      loss += err * err;
      backward_sample(tape, 2.0 * err);
    }
    const double lambda = profile_.l2_lambda;
    visit([&](Parameter& p) {
      if (p.regularized) p.grad += lambda * p.value;
    });
    return loss + l2_penalty();
  }

  double loss(const Tensor& batch, std::span<const double> targets) {
    const auto r = forward(batch);
    double acc = 0.0;
    for (std::size_t b = 0; b < targets.size(); ++b) acc += (r.prediction[b] - targets[b]) * (r.prediction[b] - targets[b]);
    return acc + l2_penalty();
  }

  std::vector<ResidualConvUnit>& conv_units() { return conv_; }
  std::optional<AttentionUnit>& conv_attention() { return conv_attention_; }
  std::optional<AttentionUnit>& lstm_attention() { return lstm_attention_; }
  std::vector<Dense>& dense_layers() { return dense_; }
  Dense& head() { return head_; }

private:
  ModelProfile profile_;
  std::vector<ResidualConvUnit> conv_;
  std::optional<AttentionUnit> conv_attention_;
  std::vector<ResidualLstmUnit> lstm_;
  std::optional<Shortcut> cross_;
  std::optional<AttentionUnit> lstm_attention_;
  std::vector<Dense> dense_;
  Dense head_;
};

}  // namespace carle::nn
