#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tfalt/error.hpp"

namespace tfalt {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

/// Norms at or below this are treated as degenerate.
inline constexpr double kDegenerateNorm = 1e-12;

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

template <typename DM, typename DV>
VectorX<typename DM::Scalar> matvec(const Eigen::MatrixBase<DM>& m,
                                    const Eigen::MatrixBase<DV>& v) {
  if (m.cols() != v.size()) {
    fail(Errc::shape, "matvec: matrix has " + std::to_string(m.cols()) +
                          " columns but vector has dimension " +
                          std::to_string(v.size()));
  }
  return m * v;
}

template <typename Derived>
VectorX<typename Derived::Scalar> l2_normalize(const Eigen::MatrixBase<Derived>& v) {
  const auto n = v.norm();
  if (!(n > kDegenerateNorm)) {
    fail(Errc::degenerate_vector, "l2_normalize: norm " + std::to_string(n) +
                                      " is below the degenerate threshold");
  }
  return v / n;
}

/// Cosine similarity clamped to [-1, 1].
template <typename DU, typename DV>
typename DU::Scalar cosine_sim(const Eigen::MatrixBase<DU>& u,
                               const Eigen::MatrixBase<DV>& v) {
  using Scalar = typename DU::Scalar;
  if (u.size() != v.size()) {
    fail(Errc::shape, "cosine_sim: dimensions " + std::to_string(u.size()) +
                          " and " + std::to_string(v.size()) + " differ");
  }
  const Scalar nu = u.norm();
  const Scalar nv = v.norm();
  if (!(nu > kDegenerateNorm) || !(nv > kDegenerateNorm)) {
    fail(Errc::degenerate_vector, "cosine_sim: zero-norm argument");
  }
  const Scalar s = u.dot(v) / (nu * nv);
  return std::clamp(s, Scalar(-1), Scalar(1));
}

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= Scalar(0)) {
    return Scalar(1) / (Scalar(1) + std::exp(-x));
  }
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  const Scalar m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

template <typename Derived>
VectorX<typename Derived::Scalar> log_softmax(const Eigen::MatrixBase<Derived>& z) {
  return z.array() - log_sum_exp(z);
}

template <typename Derived>
VectorX<typename Derived::Scalar> stable_softmax(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> e = (z.array() - z.maxCoeff()).exp();
  return e / e.sum();
}

/// Index of the largest entry; ties resolve to the lowest index.
template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& z) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < z.size(); ++i) {
    if (z(i) > z(best)) best = i;
  }
  return best;
}

}  // namespace tfalt
