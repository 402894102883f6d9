#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <algorithm>
#include <limits>
#include <vector>

namespace asas {

/// log(sum(exp(v))) for a vector expression; -inf for an all -inf input.
template <class Derived>
typename Derived::Scalar logsumexp(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

/// Row-wise log-softmax of a matrix expression.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> log_softmax_rows(
    const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> out(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const Scalar lse = logsumexp(z.row(i));
    out.row(i) = z.row(i).array() - lse;
  }
  return out;
}

/// Index of the largest entry per row; earliest column wins ties.
template <class Derived>
std::vector<int> argmax_rows(const Eigen::MatrixBase<Derived>& z) {
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < z.cols(); ++j)
      if (z(i, j) > z(i, best)) best = j;
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

/// Numerically stable log(1 + exp(x)).
template <class Scalar>
Scalar softplus(Scalar x) {
  return std::max(x, Scalar(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace asas
