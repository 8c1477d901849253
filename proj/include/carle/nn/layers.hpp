#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "carle/error.hpp"

namespace carle::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

/// A trainable tensor with its accumulated gradient.
struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool regularized = false;  // contributes (lambda / 2) * ||w||^2 to the loss

  Parameter() = default;
  Parameter(std::string n, Eigen::Index rows, Eigen::Index cols, bool reg = false)
      : name(std::move(n)), value(Mat::Zero(rows, cols)), grad(Mat::Zero(rows, cols)), regularized(reg) {}

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
  void zero_grad() { grad.setZero(); }

  void init_uniform(double limit, Rng& rng) {
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < value.size(); ++i) value.data()[i] = u(rng);
  }
};

inline double fan_in_limit(std::size_t fan_in) { return std::sqrt(3.0 / static_cast<double>(fan_in)); }

inline void check_width(const Mat& x, std::size_t expected, const std::string& layer) {
  if (static_cast<std::size_t>(x.cols()) != expected)
    throw InputError(layer + ": expected input width " + std::to_string(expected) + ", got " +
                     std::to_string(x.cols()));
}

inline Mat sigmoid(const Mat& z) { return (1.0 + (-z.array()).exp()).inverse().matrix(); }

/// Affine map applied row by row: y = x W + b.
class Dense {
public:
  struct Cache {
    Mat x;
  };

  Dense() = default;
  Dense(std::string name, std::size_t in, std::size_t out)
      : in_(in), out_(out),
        weight_(name + ".W", static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out)),
        bias_(name + ".b", 1, static_cast<Eigen::Index>(out)) {}

  void init(Rng& rng) {
    weight_.init_uniform(fan_in_limit(in_), rng);
    bias_.value.setZero();
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    check_width(x, in_, weight_.name);
    if (cache) cache->x = x;
    return (x * weight_.value).rowwise() + bias_.value.row(0);
  }

  Mat backward(const Mat& dy, const Cache& cache) {
    weight_.grad.noalias() += cache.x.transpose() * dy;
    bias_.grad += dy.colwise().sum();
    return dy * weight_.value.transpose();
  }

  template <class F>
  void visit(F&& f) {
    f(weight_);
    f(bias_);
  }

  std::size_t in() const noexcept { return in_; }
  std::size_t out() const noexcept { return out_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  Parameter weight_;
  Parameter bias_;
};

/// 1-D convolution over the time axis with "same" padding (left pad
/// (k - 1) / 2, the rest on the right). Input rows are time steps.
class Conv1d {
public:
  struct Cache {
    Mat patches;  // T x (kernel * in)
  };

  Conv1d() = default;
  Conv1d(std::string name, std::size_t in, std::size_t filters, std::size_t kernel)
      : in_(in), filters_(filters), kernel_(kernel),
        weight_(name + ".W", static_cast<Eigen::Index>(kernel * in), static_cast<Eigen::Index>(filters), true),
        bias_(name + ".b", 1, static_cast<Eigen::Index>(filters)) {
    if (kernel == 0 || filters == 0 || in == 0) throw ParameterError(name + ": conv dimensions must be positive");
  }

  void init(Rng& rng) {
    weight_.init_uniform(fan_in_limit(kernel_ * in_), rng);
    bias_.value.setZero();
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    check_width(x, in_, weight_.name);
    const Eigen::Index t_len = x.rows();
    const auto in = static_cast<Eigen::Index>(in_);
    const auto left = static_cast<Eigen::Index>((kernel_ - 1) / 2);
    Mat patches = Mat::Zero(t_len, static_cast<Eigen::Index>(kernel_) * in);
    for (Eigen::Index t = 0; t < t_len; ++t)
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(kernel_); ++j) {
        const Eigen::Index src = t + j - left;
        if (src >= 0 && src < t_len) patches.block(t, j * in, 1, in) = x.row(src);
      }
    Mat y = (patches * weight_.value).rowwise() + bias_.value.row(0);
    if (cache) cache->patches = std::move(patches);
    return y;
  }

  Mat backward(const Mat& dy, const Cache& cache) {
    weight_.grad.noalias() += cache.patches.transpose() * dy;
    bias_.grad += dy.colwise().sum();
    const Mat dp = dy * weight_.value.transpose();
    const Eigen::Index t_len = dy.rows();
    const auto in = static_cast<Eigen::Index>(in_);
    const auto left = static_cast<Eigen::Index>((kernel_ - 1) / 2);
    Mat dx = Mat::Zero(t_len, in);
    for (Eigen::Index t = 0; t < t_len; ++t)
      for (Eigen::Index j = 0; j < static_cast<Eigen::Index>(kernel_); ++j) {
        const Eigen::Index src = t + j - left;
        if (src >= 0 && src < t_len) dx.row(src) += dp.block(t, j * in, 1, in);
      }
    return dx;
  }

  template <class F>
  void visit(F&& f) {
    f(weight_);
    f(bias_);
  }

  std::size_t in() const noexcept { return in_; }
  std::size_t filters() const noexcept { return filters_; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

private:
  std::size_t in_ = 0;
  std::size_t filters_ = 0;
  std::size_t kernel_ = 1;
  Parameter weight_;
  Parameter bias_;
};

inline Mat relu(const Mat& z) { return z.cwiseMax(0.0); }

// Gradient through a ReLU given its output.
inline Mat relu_backward(const Mat& dy, const Mat& y) { return (y.array() > 0.0).select(dy, 0.0); }

/// Non-overlapping max pooling over time (stride = pool size, valid padding).
class MaxPool1d {
public:
  struct Cache {
    std::vector<Eigen::Index> argmax;  // source row per (out_row, channel)
    Eigen::Index in_rows = 0;
  };

  explicit MaxPool1d(std::size_t pool = 1) : pool_(pool) {
    if (pool == 0) throw ParameterError("pool size must be positive");
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    const auto p = static_cast<Eigen::Index>(pool_);
    const Eigen::Index rows = x.rows() / p;
    if (rows == 0) throw InputError("sequence shorter than the pooling size");
    Mat y(rows, x.cols());
    if (cache) {
      cache->argmax.assign(static_cast<std::size_t>(rows * x.cols()), 0);
      cache->in_rows = x.rows();
    }
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        Eigen::Index best = r * p;
        for (Eigen::Index k = 1; k < p; ++k)
          if (x(r * p + k, c) > x(best, c)) best = r * p + k;
        y(r, c) = x(best, c);
        if (cache) cache->argmax[static_cast<std::size_t>(r * x.cols() + c)] = best;
      }
    return y;
  }

  Mat backward(const Mat& dy, const Cache& cache) const {
    Mat dx = Mat::Zero(cache.in_rows, dy.cols());
    for (Eigen::Index r = 0; r < dy.rows(); ++r)
      for (Eigen::Index c = 0; c < dy.cols(); ++c)
        dx(cache.argmax[static_cast<std::size_t>(r * dy.cols() + c)], c) += dy(r, c);
    return dx;
  }

  std::size_t pool() const noexcept { return pool_; }

private:
  std::size_t pool_ = 1;
};

/// Self-attention over the rows (time steps) of its input with `heads`
/// heads of width `key_dim`; projects back to the input width.
class MultiHeadAttention {
public:
  struct Cache {
    Mat x, q, k, v, concat;
    std::vector<Mat> attention;  // per head, T x T, rows sum to 1
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(std::string name, std::size_t model_dim, std::size_t heads, std::size_t key_dim)
      : dim_(model_dim), heads_(heads), key_dim_(key_dim),
        wq_(name + ".Wq", static_cast<Eigen::Index>(model_dim), static_cast<Eigen::Index>(heads * key_dim)),
        bq_(name + ".bq", 1, static_cast<Eigen::Index>(heads * key_dim)),
        wk_(name + ".Wk", static_cast<Eigen::Index>(model_dim), static_cast<Eigen::Index>(heads * key_dim)),
        bk_(name + ".bk", 1, static_cast<Eigen::Index>(heads * key_dim)),
        wv_(name + ".Wv", static_cast<Eigen::Index>(model_dim), static_cast<Eigen::Index>(heads * key_dim)),
        bv_(name + ".bv", 1, static_cast<Eigen::Index>(heads * key_dim)),
        wo_(name + ".Wo", static_cast<Eigen::Index>(heads * key_dim), static_cast<Eigen::Index>(model_dim)),
        bo_(name + ".bo", 1, static_cast<Eigen::Index>(model_dim)) {
    if (heads == 0 || key_dim == 0 || model_dim == 0) throw ParameterError(name + ": attention sizes must be positive");
  }

  void init(Rng& rng) {
    for (Parameter* p : {&wq_, &wk_, &wv_}) p->init_uniform(fan_in_limit(dim_), rng);
    wo_.init_uniform(fan_in_limit(heads_ * key_dim_), rng);
    for (Parameter* p : {&bq_, &bk_, &bv_, &bo_}) p->value.setZero();
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    check_width(x, dim_, wq_.name);
    Cache local;
    Cache& c = cache ? *cache : local;
    c.x = x;
    c.q = (x * wq_.value).rowwise() + bq_.value.row(0);
    c.k = (x * wk_.value).rowwise() + bk_.value.row(0);
    c.v = (x * wv_.value).rowwise() + bv_.value.row(0);
    c.concat.resize(x.rows(), static_cast<Eigen::Index>(heads_ * key_dim_));
    c.attention.resize(heads_);
    const auto d = static_cast<Eigen::Index>(key_dim_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(key_dim_));
    for (std::size_t h = 0; h < heads_; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * d;
      Mat s = (c.q.middleCols(off, d) * c.k.middleCols(off, d).transpose()) * scale;
      for (Eigen::Index r = 0; r < s.rows(); ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp().matrix();
        s.row(r) /= s.row(r).sum();
      }
      c.concat.middleCols(off, d) = s * c.v.middleCols(off, d);
      c.attention[h] = std::move(s);
    }
    return (c.concat * wo_.value).rowwise() + bo_.value.row(0);
  }

  Mat backward(const Mat& dy, const Cache& c) {
    wo_.grad.noalias() += c.concat.transpose() * dy;
    bo_.grad += dy.colwise().sum();
    const Mat dconcat = dy * wo_.value.transpose();
    Mat dq = Mat::Zero(c.q.rows(), c.q.cols());
    Mat dk = Mat::Zero(c.k.rows(), c.k.cols());
    Mat dv = Mat::Zero(c.v.rows(), c.v.cols());
    const auto d = static_cast<Eigen::Index>(key_dim_);
    const double scale = 1.0 / std::sqrt(static_cast<double>(key_dim_));
    for (std::size_t h = 0; h < heads_; ++h) {
      const Eigen::Index off = static_cast<Eigen::Index>(h) * d;
      const Mat& a = c.attention[h];
      const Mat d_out = dconcat.middleCols(off, d);
      const Mat da = d_out * c.v.middleCols(off, d).transpose();
      dv.middleCols(off, d) = a.transpose() * d_out;
      const Eigen::VectorXd row_dot = (da.array() * a.array()).rowwise().sum();
      const Mat ds = (a.array() * (da.array().colwise() - row_dot.array())).matrix() * scale;
      dq.middleCols(off, d) = ds * c.k.middleCols(off, d);
      dk.middleCols(off, d) = ds.transpose() * c.q.middleCols(off, d);
    }
    wq_.grad.noalias() += c.x.transpose() * dq;
    wk_.grad.noalias() += c.x.transpose() * dk;
    wv_.grad.noalias() += c.x.transpose() * dv;
    bq_.grad += dq.colwise().sum();
    bk_.grad += dk.colwise().sum();
    bv_.grad += dv.colwise().sum();
    return dq * wq_.value.transpose() + dk * wk_.value.transpose() + dv * wv_.value.transpose();
  }

  template <class F>
  void visit(F&& f) {
    for (Parameter* p : {&wq_, &bq_, &wk_, &bk_, &wv_, &bv_, &wo_, &bo_}) f(*p);
  }

  std::size_t heads() const noexcept { return heads_; }
  std::size_t key_dim() const noexcept { return key_dim_; }

private:
  std::size_t dim_ = 0;
  std::size_t heads_ = 0;
  std::size_t key_dim_ = 0;
  Parameter wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
};

/// Stateless LSTM returning the full hidden sequence. Each gate reads the
/// concatenation [H_{t-1}, X_t]:
///   C = tanh(.), I = sigmoid(.), F = sigmoid(.), O = sigmoid(.)
///   S_t = C * I + S_{t-1} * F,   H_t = O * tanh(S_t)
class Lstm {
public:
  struct Cache {
    Mat z;                 // T x (units + in), rows [H_{t-1}, X_t]
    Mat c, i, f, o;        // gate activations, T x units
    Mat s, tanh_s;         // cell state, T x units
  };

  Lstm() = default;
  Lstm(std::string name, std::size_t in, std::size_t units) : in_(in), units_(units) {
    if (in == 0 || units == 0) throw ParameterError(name + ": LSTM sizes must be positive");
    const auto rows = static_cast<Eigen::Index>(in + units);
    const auto cols = static_cast<Eigen::Index>(units);
    const char* gates[] = {"g", "i", "f", "o"};
    for (std::size_t k = 0; k < 4; ++k) {
      w_[k] = Parameter(name + ".W" + gates[k], rows, cols);
      b_[k] = Parameter(name + ".b" + gates[k], 1, cols);
    }
  }

  void init(Rng& rng) {
    for (std::size_t k = 0; k < 4; ++k) {
      w_[k].init_uniform(fan_in_limit(in_ + units_), rng);
      b_[k].value.setZero();
    }
    b_[kForget].value.setOnes();
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    check_width(x, in_, w_[0].name);
    const Eigen::Index t_len = x.rows();
    const auto u = static_cast<Eigen::Index>(units_);
    Cache local;
    Cache& c = cache ? *cache : local;
    c.z.resize(t_len, u + static_cast<Eigen::Index>(in_));
    for (Mat* m : {&c.c, &c.i, &c.f, &c.o, &c.s, &c.tanh_s}) m->resize(t_len, u);
    Mat out(t_len, u);
    Mat h = Mat::Zero(1, u);
    Mat s = Mat::Zero(1, u);
    for (Eigen::Index t = 0; t < t_len; ++t) {
      c.z.block(t, 0, 1, u) = h;
      c.z.block(t, u, 1, static_cast<Eigen::Index>(in_)) = x.row(t);
      const Mat z = c.z.row(t);
      const Mat g = ((z * w_[kCandidate].value) + b_[kCandidate].value).array().tanh().matrix();
      const Mat i = sigmoid((z * w_[kInput].value) + b_[kInput].value);
      const Mat f = sigmoid((z * w_[kForget].value) + b_[kForget].value);
      const Mat o = sigmoid((z * w_[kOutput].value) + b_[kOutput].value);
      s = (g.array() * i.array() + s.array() * f.array()).matrix();
      const Mat ts = s.array().tanh().matrix();
      h = (o.array() * ts.array()).matrix();
      c.c.row(t) = g;
      c.i.row(t) = i;
      c.f.row(t) = f;
      c.o.row(t) = o;
      c.s.row(t) = s;
      c.tanh_s.row(t) = ts;
      out.row(t) = h;
    }
    return out;
  }

  Mat backward(const Mat& dy, const Cache& c) {
    const Eigen::Index t_len = dy.rows();
    const auto u = static_cast<Eigen::Index>(units_);
    Mat dx(t_len, static_cast<Eigen::Index>(in_));
    Eigen::ArrayXXd dh_next = Eigen::ArrayXXd::Zero(1, u);
    Eigen::ArrayXXd ds_next = Eigen::ArrayXXd::Zero(1, u);
    for (Eigen::Index t = t_len - 1; t >= 0; --t) {
      const Eigen::ArrayXXd dh = dy.row(t).array() + dh_next;
      const Eigen::ArrayXXd g = c.c.row(t).array();
      const Eigen::ArrayXXd i = c.i.row(t).array();
      const Eigen::ArrayXXd f = c.f.row(t).array();
      const Eigen::ArrayXXd o = c.o.row(t).array();
      const Eigen::ArrayXXd ts = c.tanh_s.row(t).array();
      const Eigen::ArrayXXd s_prev =
          t > 0 ? Eigen::ArrayXXd(c.s.row(t - 1).array()) : Eigen::ArrayXXd::Zero(1, u);

      const Eigen::ArrayXXd d_o = dh * ts;
      const Eigen::ArrayXXd ds = dh * o * (1.0 - ts * ts) + ds_next;
      const Eigen::ArrayXXd dg = ds * i;
      const Eigen::ArrayXXd di = ds * g;
      const Eigen::ArrayXXd df = ds * s_prev;
      ds_next = ds * f;

      const Mat dz_gate[4] = {(dg * (1.0 - g * g)).matrix(), (di * i * (1.0 - i)).matrix(),
                              (df * f * (1.0 - f)).matrix(), (d_o * o * (1.0 - o)).matrix()};
      const Mat z = c.z.row(t);
      Mat dz = Mat::Zero(1, z.cols());
      for (std::size_t k = 0; k < 4; ++k) {
        w_[k].grad.noalias() += z.transpose() * dz_gate[k];
        b_[k].grad += dz_gate[k];
        dz.noalias() += dz_gate[k] * w_[k].value.transpose();
      }
      dh_next = dz.leftCols(u).array();
      dx.row(t) = dz.rightCols(static_cast<Eigen::Index>(in_));
    }
    return dx;
  }

  template <class F>
  void visit(F&& f) {
    for (std::size_t k = 0; k < 4; ++k) {
      f(w_[k]);
      f(b_[k]);
    }
  }

  std::size_t in() const noexcept { return in_; }
  std::size_t units() const noexcept { return units_; }

private:
  static constexpr std::size_t kCandidate = 0;
  static constexpr std::size_t kInput = 1;
  static constexpr std::size_t kForget = 2;
  static constexpr std::size_t kOutput = 3;

  std::size_t in_ = 0;
  std::size_t units_ = 0;
  Parameter w_[4];
  Parameter b_[4];
};

/// Skip path of a residual unit: identity when widths agree, otherwise a
/// learned 1x1 projection.
class Shortcut {
public:
  struct Cache {
    Dense::Cache projection;
  };

  Shortcut() = default;
  Shortcut(std::string name, std::size_t in, std::size_t out) {
    if (in != out) projection_.emplace(std::move(name), in, out);
  }

  void init(Rng& rng) {
    if (projection_) projection_->init(rng);
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    return projection_ ? projection_->forward(x, cache ? &cache->projection : nullptr) : x;
  }

  Mat backward(const Mat& dy, const Cache& cache) {
    return projection_ ? projection_->backward(dy, cache.projection) : dy;
  }

  template <class F>
  void visit(F&& f) {
    if (projection_) projection_->visit(f);
  }

  bool is_identity() const noexcept { return !projection_; }

private:
  std::optional<Dense> projection_;
};

/// Conv -> (+ shortcut) -> ReLU -> MaxPool. With `residual` off this is a
/// plain convolution layer.
class ResidualConvUnit {
public:
  struct Cache {
    Conv1d::Cache conv;
    Shortcut::Cache skip;
    Mat activated;
    MaxPool1d::Cache pool;
  };

  ResidualConvUnit() = default;
  ResidualConvUnit(const std::string& name, std::size_t in, std::size_t filters, std::size_t kernel, std::size_t pool,
                   bool residual)
      : conv_(name + ".conv", in, filters, kernel), pool_(pool) {
    if (residual) skip_.emplace(name + ".skip", in, filters);
  }

  void init(Rng& rng) {
    conv_.init(rng);
    if (skip_) skip_->init(rng);
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    Mat z = conv_.forward(x, cache ? &cache->conv : nullptr);
    if (skip_) z += skip_->forward(x, cache ? &cache->skip : nullptr);
    Mat a = relu(z);
    Mat y = pool_.forward(a, cache ? &cache->pool : nullptr);
    if (cache) cache->activated = std::move(a);
    return y;
  }

  Mat backward(const Mat& dy, const Cache& cache) {
    const Mat dz = relu_backward(pool_.backward(dy, cache.pool), cache.activated);
    Mat dx = conv_.backward(dz, cache.conv);
    if (skip_) dx += skip_->backward(dz, cache.skip);
    return dx;
  }

  template <class F>
  void visit(F&& f) {
    conv_.visit(f);
    if (skip_) skip_->visit(f);
  }

  Conv1d& conv() { return conv_; }
  std::optional<Shortcut>& shortcut() { return skip_; }
  std::size_t filters() const noexcept { return conv_.filters(); }

private:
  Conv1d conv_;
  std::optional<Shortcut> skip_;
  MaxPool1d pool_;
};

/// LSTM (+ shortcut). No activation after the add.
class ResidualLstmUnit {
public:
  struct Cache {
    Lstm::Cache lstm;
    Shortcut::Cache skip;
  };

  ResidualLstmUnit() = default;
  ResidualLstmUnit(const std::string& name, std::size_t in, std::size_t units, bool residual)
      : lstm_(name + ".lstm", in, units) {
    if (residual) skip_.emplace(name + ".skip", in, units);
  }

  void init(Rng& rng) {
    lstm_.init(rng);
    if (skip_) skip_->init(rng);
  }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    Mat y = lstm_.forward(x, cache ? &cache->lstm : nullptr);
    if (skip_) y += skip_->forward(x, cache ? &cache->skip : nullptr);
    return y;
  }

  Mat backward(const Mat& dy, const Cache& cache) {
    Mat dx = lstm_.backward(dy, cache.lstm);
    if (skip_) dx += skip_->backward(dy, cache.skip);
    return dx;
  }

  template <class F>
  void visit(F&& f) {
    lstm_.visit(f);
    if (skip_) skip_->visit(f);
  }

  std::size_t units() const noexcept { return lstm_.units(); }

private:
  Lstm lstm_;
  std::optional<Shortcut> skip_;
};

/// Attention sublayer with an optional identity skip around it.
class AttentionUnit {
public:
  struct Cache {
    MultiHeadAttention::Cache mha;
  };

  AttentionUnit() = default;
  AttentionUnit(const std::string& name, std::size_t dim, std::size_t heads, std::size_t key_dim, bool residual)
      : mha_(name, dim, heads, key_dim), residual_(residual) {}

  void init(Rng& rng) { mha_.init(rng); }

  Mat forward(const Mat& x, Cache* cache = nullptr) const {
    Mat y = mha_.forward(x, cache ? &cache->mha : nullptr);
    if (residual_) y += x;
    return y;
  }

  Mat backward(const Mat& dy, const Cache& cache) {
    Mat dx = mha_.backward(dy, cache.mha);
    if (residual_) dx += dy;
    return dx;
  }

  template <class F>
  void visit(F&& f) {
    mha_.visit(f);
  }

  const MultiHeadAttention& attention() const noexcept { return mha_; }

private:
  MultiHeadAttention mha_;
  bool residual_ = true;
};

}  // namespace carle::nn
