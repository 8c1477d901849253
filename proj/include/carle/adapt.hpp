#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "carle/error.hpp"
#include "carle/matrix.hpp"

namespace carle::adapt {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat to_eigen(const Matrix& m) {
  Mat out(static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(r, c);
  return out;
}

inline Matrix from_eigen(const Mat& m) {
  Matrix out(static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = m(r, c);
  return out;
}

inline Vec column_mean(const Mat& x) { return x.colwise().mean().transpose(); }

/// Unbiased sample covariance of the rows of `x`.
inline Mat covariance(const Mat& x) {
  if (x.rows() < 2) throw InputError("covariance needs at least two rows");
  const Mat centered = x.rowwise() - x.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

struct PcaModel {
  Vec mean;
  Mat components;  // k x d, orthonormal rows
  std::vector<double> explained_variance;

  std::size_t k() const { return static_cast<std::size_t>(components.rows()); }
  std::size_t d() const { return static_cast<std::size_t>(components.cols()); }
};

/// Principal axes of the centered data, largest variance first. Each
/// component is signed so that its largest-magnitude loading is positive.
inline PcaModel pca_fit(const Mat& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  const auto d = static_cast<std::size_t>(x.cols());
  if (n < 2) throw InputError("PCA needs at least two rows");
  if (k == 0 || k > std::min(n - 1, d))
    throw ParameterError("PCA component count " + std::to_string(k) + " must lie in [1, min(rows - 1, cols)] = [1, " +
                         std::to_string(std::min(n - 1, d)) + "]");

  Eigen::SelfAdjointEigenSolver<Mat> eig(covariance(x));
  if (eig.info() != Eigen::Success) throw NumericalError("PCA eigendecomposition failed");

  PcaModel model{column_mean(x), Mat(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(d)), {}};
  for (std::size_t i = 0; i < k; ++i) {
    const auto col = static_cast<Eigen::Index>(d - 1 - i);  // eigenvalues ascend
    Vec v = eig.eigenvectors().col(col);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.components.row(static_cast<Eigen::Index>(i)) = v.transpose();
    model.explained_variance.push_back(std::max(0.0, eig.eigenvalues()(col)));
  }
  return model;
}

inline Mat pca_transform(const PcaModel& model, const Mat& x) {
  if (static_cast<std::size_t>(x.cols()) != model.d())
    throw InputError("PCA expects " + std::to_string(model.d()) + " columns, got " + std::to_string(x.cols()));
  return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

inline Mat pca_inverse_transform(const PcaModel& model, const Mat& z) {
  if (static_cast<std::size_t>(z.cols()) != model.k())
    throw InputError("PCA inverse expects " + std::to_string(model.k()) + " columns, got " + std::to_string(z.cols()));
  return (z * model.components).rowwise() + model.mean.transpose();
}

namespace detail {

// Symmetric matrix power via eigendecomposition, eigenvalues floored at `floor`.
inline Mat sym_power(const Mat& c, double power, double floor) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(c);
  if (eig.info() != Eigen::Success) throw NumericalError("CORAL eigendecomposition failed");
  Vec lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) lambda(i) = std::pow(std::max(lambda(i), floor), power);
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace detail

/// Affine map matching source second-order statistics to the target:
///   aligned = (x - mu_s) * C_s^{-1/2} * C_t^{1/2} + mu_t
struct CoralTransform {
  Vec source_mean;
  Vec target_mean;
  Mat source_whitener;  // C_s^{-1/2}
  Mat target_colorer;   // C_t^{1/2}
  double ridge = 1e-8;

  std::size_t width() const { return static_cast<std::size_t>(source_mean.size()); }
};

inline CoralTransform coral_fit(const Mat& source, const Mat& target, double ridge = 1e-8) {
  if (source.cols() != target.cols())
    throw InputError("CORAL source has " + std::to_string(source.cols()) + " columns, target " +
                     std::to_string(target.cols()));
  const auto d = source.cols();
  if (source.rows() < d + 1 || target.rows() < d + 1)
    throw InputError("CORAL needs at least width + 1 = " + std::to_string(d + 1) + " rows per domain");
  if (ridge < 0.0) throw ParameterError("CORAL ridge must be >= 0");

  const Mat id = Mat::Identity(d, d);
  const Mat cs = covariance(source) + ridge * id;
  const Mat ct = covariance(target) + ridge * id;
  if (ridge == 0.0) {
    for (const Mat* c : {&cs, &ct}) {
      Eigen::SelfAdjointEigenSolver<Mat> eig(*c, Eigen::EigenvaluesOnly);
      const double top = std::max(eig.eigenvalues().maxCoeff(), 1e-300);
      if (eig.eigenvalues().minCoeff() <= 1e-12 * top)
        throw NumericalError("CORAL covariance is singular; use a positive ridge");
    }
  }
  const double floor = ridge > 0.0 ? ridge : 1e-300;
  return {column_mean(source), column_mean(target), detail::sym_power(cs, -0.5, floor),
          detail::sym_power(ct, 0.5, floor), ridge};
}

inline Mat coral_apply(const CoralTransform& t, const Mat& x) {
  if (static_cast<std::size_t>(x.cols()) != t.width())
    throw InputError("CORAL expects " + std::to_string(t.width()) + " columns, got " + std::to_string(x.cols()));
  return ((x.rowwise() - t.source_mean.transpose()) * t.source_whitener * t.target_colorer).rowwise() +
         t.target_mean.transpose();
}

}  // namespace carle::adapt
