#pragma once

#include "relcl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace relcl {

/// dot(a, b) / (|a| |b|). Zero vectors have no direction and are rejected.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_similarity(const Eigen::MatrixBase<DerivedA>& a,
                                            const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_similarity: vectors differ in length");
  const auto na = a.norm();
  const auto nb = b.norm();
  if (na == 0 || nb == 0) throw Error("cosine_similarity: undefined for a zero vector");
  using Scalar = typename DerivedA::Scalar;
  Scalar dot(0);
  for (Index i = 0; i < a.size(); ++i) dot += a.derived().coeff(i) * b.derived().coeff(i);
  const Scalar c = dot / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

/// Multi-positive InfoNCE negative log-likelihood over candidate rows:
///   -log( sum_{p in positives} e^{s_p / tau} / sum_k e^{s_k / tau} )
/// with s_k the cosine similarity of `anchor` to candidate row k.
double contrastive_nll(const RowVector& anchor, const Matrix& candidates, const std::vector<Index>& positives,
                       double tau);

/// Same loss from precomputed similarities.
double contrastive_nll_from_similarities(const RowVector& similarities, const std::vector<Index>& positives,
                                         double tau);

/// Differentiable form of contrastive_nll.
Var contrastive_nll(Var anchor, const std::vector<Var>& candidates, const std::vector<Index>& positives, double tau);

/// Differentiable loss from a 1xK row of similarities.
Var contrastive_nll_from_similarities(Var similarities, const std::vector<Index>& positives, double tau);

}  // namespace relcl
