#include "relcl/contrastive.hpp"

#include <algorithm>

namespace relcl {

namespace {

void check_arguments(Index candidate_count, const std::vector<Index>& positives, double tau) {
  if (!(tau > 0.0)) throw Error("contrastive loss: temperature must be positive");
  if (positives.empty()) throw Error("contrastive loss: no positive candidate");
  for (auto p : positives) {
    if (p < 0 || p >= candidate_count) throw Error("contrastive loss: positive index out of range");
  }
  auto sorted = positives;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error("contrastive loss: duplicate positive index");
  }
}

double log_sum_exp(const RowVector& x) {
  const double shift = x.maxCoeff();
  return shift + std::log((x.array() - shift).exp().sum());
}

}  // namespace

double contrastive_nll_from_similarities(const RowVector& similarities, const std::vector<Index>& positives,
                                         double tau) {
  check_arguments(similarities.size(), positives, tau);
  const RowVector scaled = similarities / tau;
  RowVector pos(static_cast<Index>(positives.size()));
  for (std::size_t i = 0; i < positives.size(); ++i) pos(static_cast<Index>(i)) = scaled(positives[i]);
  return log_sum_exp(scaled) - log_sum_exp(pos);
}

double contrastive_nll(const RowVector& anchor, const Matrix& candidates, const std::vector<Index>& positives,
                       double tau) {
  if (candidates.cols() != anchor.size()) throw ShapeError("contrastive_nll: candidate width differs from anchor");
  RowVector sims(candidates.rows());
  for (Index k = 0; k < candidates.rows(); ++k) sims(k) = cosine_similarity(anchor, candidates.row(k));
  return contrastive_nll_from_similarities(sims, positives, tau);
}

Var contrastive_nll(Var anchor, const std::vector<Var>& candidates, const std::vector<Index>& positives, double tau) {
  check_arguments(static_cast<Index>(candidates.size()), positives, tau);
  std::vector<Var> sims;
  sims.reserve(candidates.size());
  for (const auto& c : candidates) sims.push_back(cosine(anchor, c));
  return contrastive_nll_from_similarities(hconcat(sims), positives, tau);
}

Var contrastive_nll_from_similarities(Var similarities, const std::vector<Index>& positives, double tau) {
  if (similarities.rows() != 1) throw ShapeError("contrastive loss: similarities must be a single row");
  check_arguments(similarities.cols(), positives, tau);
  const Var scaled = scale(similarities, 1.0 / tau);
  return sub(logsumexp(scaled), logsumexp(select_cols(scaled, positives)));
}

}  // namespace relcl
