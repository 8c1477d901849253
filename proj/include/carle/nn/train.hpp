#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "carle/error.hpp"
#include "carle/matrix.hpp"
#include "carle/metrics.hpp"
#include "carle/nn/carle_net.hpp"

namespace carle::nn {

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t max_epochs = 200;
  double learning_rate = 1e-3;
  double rho = 0.9;  // decay of the squared-gradient average
  double epsilon = 1e-7;
  std::size_t early_stopping_patience = 25;
  std::size_t reduce_lr_patience = 10;
  double reduce_lr_factor = 0.5;
  double min_learning_rate = 1e-6;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const {
    if (batch_size == 0) throw ParameterError("batch size must be positive");
    if (max_epochs == 0) throw ParameterError("max epochs must be positive");
    if (!(learning_rate > 0.0)) throw ParameterError("learning rate must be positive");
    if (!(rho >= 0.0 && rho < 1.0)) throw ParameterError("RMSProp decay must lie in [0, 1)");
    if (!(epsilon > 0.0)) throw ParameterError("RMSProp epsilon must be positive");
    if (!(reduce_lr_factor > 0.0 && reduce_lr_factor < 1.0))
      throw ParameterError("learning-rate reduction factor must lie in (0, 1)");
  }
};

/// RMSProp: E[g^2] <- rho E[g^2] + (1 - rho) g^2;  w <- w - lr g / (sqrt(E[g^2]) + eps)
class RmsProp {
public:
  RmsProp(std::vector<Parameter*> params, double learning_rate, double rho, double epsilon)
      : params_(std::move(params)), learning_rate_(learning_rate), rho_(rho), epsilon_(epsilon) {
    accum_.reserve(params_.size());
    for (auto* p : params_) accum_.push_back(Mat::Zero(p->value.rows(), p->value.cols()));
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& p = *params_[i];
      auto& acc = accum_[i];
      acc = rho_ * acc + (1.0 - rho_) * p.grad.cwiseProduct(p.grad);
      p.value.array() -= learning_rate_ * p.grad.array() / (acc.array().sqrt() + epsilon_);
    }
  }

  double learning_rate() const noexcept { return learning_rate_; }
  void set_learning_rate(double lr) noexcept { learning_rate_ = lr; }
  double rho() const noexcept { return rho_; }
  double epsilon() const noexcept { return epsilon_; }
  const std::vector<Mat>& accumulators() const noexcept { return accum_; }
  std::vector<Mat>& accumulators() noexcept { return accum_; }

private:
  std::vector<Parameter*> params_;
  std::vector<Mat> accum_;
  double learning_rate_;
  double rho_;
  double epsilon_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;  // training RMSE
  double mae = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double val_mae = std::numeric_limits<double>::quiet_NaN();
  double learning_rate = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  bool stopped_early = false;
  std::size_t state_resets = 0;
  std::size_t lr_reductions = 0;
  std::vector<Mat> optimizer_state;
  double final_learning_rate = 0.0;
};

struct Dataset {
  Tensor x;  // [n, seq_len, width]
  std::vector<double> y;

  std::size_t size() const { return y.size(); }
};

inline Tensor gather(const Tensor& x, std::span<const std::size_t> rows) {
  Tensor out({rows.size(), x.dim(1), x.dim(2)});
  const std::size_t stride = x.dim(1) * x.dim(2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x.data.begin() + static_cast<std::ptrdiff_t>(rows[i] * stride), stride,
                out.data.begin() + static_cast<std::ptrdiff_t>(i * stride));
  return out;
}

/// Logit vectors (final dense layer output) for every sample.
inline Matrix logits(const CarleNet& net, const Tensor& x) {
  const auto r = net.forward(x);
  Matrix m(x.dim(0), net.profile().logit_width());
  m.data = r.logits.data;
  return m;
}

inline std::vector<double> predict(const CarleNet& net, const Tensor& x) { return net.forward(x).prediction; }

namespace detail {
inline std::vector<Mat> snapshot(CarleNet& net) {
  std::vector<Mat> out;
  net.visit([&](Parameter& p) { out.push_back(p.value); });
  return out;
}

inline void restore(CarleNet& net, const std::vector<Mat>& weights) {
  std::size_t i = 0;
  net.visit([&](Parameter& p) { p.value = weights[i++]; });
}

inline bool all_finite(CarleNet& net) {
  bool ok = true;
  net.visit([&](Parameter& p) { ok = ok && p.value.allFinite(); });
  return ok;
}
}  // namespace detail

/// Mini-batch RMSProp on the scalar head with the callback suite:
/// state reset per epoch, model checkpoint on the monitored RMSE, LR
/// reduction on plateau, and early stopping. The monitored loss is the
/// validation RMSE when validation data is given, otherwise training RMSE.
/// On return the network holds the best weights seen.
inline TrainReport train(CarleNet& net, const Dataset& data, const TrainConfig& config,
                         const Dataset* validation = nullptr) {
  config.validate();
  if (data.size() == 0) throw InputError("training set is empty");
  net.check_batch(data.x);
  if (data.x.dim(0) != data.size()) throw InputError("training inputs and targets differ in length");
  if (validation && validation->size() == 0) validation = nullptr;

  std::mt19937_64 rng(config.seed);
  RmsProp opt(net.parameters(), config.learning_rate, config.rho, config.epsilon);
  TrainReport report;
  auto best_weights = detail::snapshot(net);
  std::vector<Mat> best_opt_state = opt.accumulators();
  std::size_t wait = 0;
  std::size_t lr_wait = 0;

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    ++report.state_resets;  // stateless LSTM: sequences always start from zero state
    if (config.shuffle) std::shuffle(order.begin(), order.end(), rng);

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const Tensor batch = gather(data.x, rows);
      std::vector<double> targets(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) targets[i] = data.y[rows[i]];
      const double loss = net.compute_gradients(batch, targets);
      if (!std::isfinite(loss)) {
        detail::restore(net, best_weights);
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) +
                             "; best weights from epoch " + std::to_string(report.best_epoch) + " restored");
      }
      opt.step();
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.learning_rate = opt.learning_rate();
    const auto pred = predict(net, data.x);
    rec.loss = rmse(data.y, pred);
    rec.mae = mae(data.y, pred);
    double monitored = rec.loss;
    if (validation) {
      const auto vp = predict(net, validation->x);
      rec.val_loss = rmse(validation->y, vp);
      rec.val_mae = mae(validation->y, vp);
      monitored = rec.val_loss;
    }
    report.history.push_back(rec);
    if (!std::isfinite(monitored) || !detail::all_finite(net)) {
      detail::restore(net, best_weights);
      throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + "; best weights from epoch " +
                           std::to_string(report.best_epoch) + " restored");
    }

    if (monitored < report.best_loss) {
      report.best_loss = monitored;
      report.best_epoch = epoch;
      best_weights = detail::snapshot(net);
      best_opt_state = opt.accumulators();
      wait = 0;
      lr_wait = 0;
      continue;
    }
    ++wait;
    ++lr_wait;
    if (wait >= config.early_stopping_patience) {
      report.stopped_early = true;
      break;
    }
    if (lr_wait >= std::max<std::size_t>(1, config.reduce_lr_patience)) {
      opt.set_learning_rate(std::max(config.min_learning_rate, opt.learning_rate() * config.reduce_lr_factor));
      ++report.lr_reductions;
      lr_wait = 0;
    }
  }

  detail::restore(net, best_weights);
  report.optimizer_state = std::move(best_opt_state);
  report.final_learning_rate = opt.learning_rate();
  return report;
}

}  // namespace carle::nn
