#ifndef RELSPLIT_LINEAR_HPP
#define RELSPLIT_LINEAR_HPP

// Logistic relevance head: p = sigmoid(w . x + b), trained with mean binary
// cross-entropy. Templated on the scalar type; features may be any dense
// Eigen vector expression or an Eigen::SparseVector.

#include "relsplit/error.hpp"

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cmath>
#include <limits>
#include <span>
#include <string>

namespace relsplit::model {

template <typename Scalar> using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar> struct LinearParams {
  VectorX<Scalar> w;
  Scalar b = Scalar(0);

  LinearParams() = default;
  explicit LinearParams(Eigen::Index dims) : w(VectorX<Scalar>::Zero(dims)) {}

  Eigen::Index dims() const { return w.size(); }
  bool all_finite() const { return w.allFinite() && std::isfinite(b); }
};

template <typename Scalar> struct LinearGradient {
  VectorX<Scalar> w;
  Scalar b = Scalar(0);
};

/// Probability clamp used by the loss.
template <typename Scalar> constexpr Scalar kProbEpsilon = Scalar(1e-12);

/// Overflow-free logistic function.
template <typename Scalar> Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0))
    return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

namespace detail {

template <typename Scalar>
void check_dims(const LinearParams<Scalar> &params, Eigen::Index x_dims) {
  if (params.dims() != x_dims)
    throw Error(ErrorCode::DimMismatch, "params have " + std::to_string(params.dims()) +
                                            " dims, features " + std::to_string(x_dims));
}

template <typename Scalar, typename Derived>
Scalar dot(const LinearParams<Scalar> &params, const Eigen::MatrixBase<Derived> &x) {
  return params.w.dot(x);
}

template <typename Scalar, typename Derived>
Scalar dot(const LinearParams<Scalar> &params, const Eigen::SparseMatrixBase<Derived> &x) {
  Scalar acc(0);
  for (typename Derived::InnerIterator it(x.derived(), 0); it; ++it)
    acc += params.w[it.index()] * it.value();
  return acc;
}

template <typename Derived, typename Scalar>
void axpy(VectorX<Scalar> &y, Scalar a, const Eigen::MatrixBase<Derived> &x) {
  y.noalias() += a * x;
}

template <typename Derived, typename Scalar>
void axpy(VectorX<Scalar> &y, Scalar a, const Eigen::SparseMatrixBase<Derived> &x) {
  for (typename Derived::InnerIterator it(x.derived(), 0); it; ++it)
    y[it.index()] += a * it.value();
}

} // namespace detail

/// w . x + b.
template <typename Scalar, typename Features>
Scalar logit(const LinearParams<Scalar> &params, const Features &x) {
  detail::check_dims(params, x.size());
  return detail::dot(params, x) + params.b;
}

/// sigmoid(w . x + b), kept strictly inside (0, 1).
template <typename Scalar, typename Features>
Scalar predict_proba(const LinearParams<Scalar> &params, const Features &x) {
  const Scalar p = sigmoid(logit(params, x));
  const Scalar lo = std::numeric_limits<Scalar>::min();
  const Scalar hi = Scalar(1) - std::numeric_limits<Scalar>::epsilon() / Scalar(2);
  return std::min(std::max(p, lo), hi);
}

/// One labeled example; the features are borrowed.
template <typename Features> struct Sample {
  const Features *x;
  int label;
};

/// Mean binary cross-entropy with p clamped to [eps, 1 - eps], plus
/// (l2 / 2) |w|^2.
template <typename Scalar, typename Features>
Scalar batch_loss(const LinearParams<Scalar> &params, std::span<const Sample<Features>> batch,
                  Scalar l2 = Scalar(0)) {
  if (batch.empty())
    throw Error(ErrorCode::EmptyBatch, "batch_loss on an empty batch");
  const Scalar eps = kProbEpsilon<Scalar>;
  Scalar total(0);
  for (const auto &s : batch) {
    const Scalar p = std::min(std::max(sigmoid(logit(params, *s.x)), eps), Scalar(1) - eps);
    total -= s.label == 1 ? std::log(p) : std::log(Scalar(1) - p);
  }
  Scalar loss = total / static_cast<Scalar>(batch.size());
  if (l2 > Scalar(0))
    loss += l2 / Scalar(2) * params.w.squaredNorm();
  return loss;
}

/// Analytic gradient of batch_loss (unclamped p):
///   grad_w = mean((p - y) x) + l2 w,  grad_b = mean(p - y).
template <typename Scalar, typename Features>
LinearGradient<Scalar> batch_grad(const LinearParams<Scalar> &params,
                                  std::span<const Sample<Features>> batch,
                                  Scalar l2 = Scalar(0)) {
  if (batch.empty())
    throw Error(ErrorCode::EmptyBatch, "batch_grad on an empty batch");
  LinearGradient<Scalar> g{VectorX<Scalar>::Zero(params.dims()), Scalar(0)};
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(batch.size());
  for (const auto &s : batch) {
    const Scalar r = sigmoid(logit(params, *s.x)) - static_cast<Scalar>(s.label);
    detail::axpy(g.w, r * inv_n, *s.x);
    g.b += r * inv_n;
  }
  if (l2 != Scalar(0))
    g.w.noalias() += l2 * params.w;
  return g;
}

} // namespace relsplit::model

#endif // RELSPLIT_LINEAR_HPP
