#include "support.hpp"

#include <cmath>

using namespace relcl;
using relcl::testing::random_matrix;

TEST_CASE("single positive candidate gives zero loss") {
  const RowVector a = random_matrix(1, 5, 1).row(0);
  CHECK(contrastive_nll(a, random_matrix(1, 5, 2), {0}, 0.1) == doctest::Approx(0.0));
  CHECK(contrastive_nll_from_similarities(RowVector::Constant(4, 0.3), {0, 1, 2, 3}, 0.5) == doctest::Approx(0.0));
}

TEST_CASE("uniform similarities give log of the candidate ratio") {
  for (int z : {2, 5, 8}) {
    const RowVector s = RowVector::Constant(z, 0.42);
    CHECK(contrastive_nll_from_similarities(s, {0}, 0.1) == doctest::Approx(std::log(z)).epsilon(1e-12));
    CHECK(contrastive_nll_from_similarities(s, {0, 1}, 0.7) == doctest::Approx(std::log(z / 2.0)).epsilon(1e-12));
  }
}

TEST_CASE("loss matches a direct softmax computation") {
  const RowVector s = random_matrix(1, 6, 3).row(0).array().tanh();
  const double tau = 0.25;
  double denom = 0.0;
  double num = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    denom += std::exp(s(i) / tau);
    if (i == 1 || i == 4) num += std::exp(s(i) / tau);
  }
  CHECK(contrastive_nll_from_similarities(s, {1, 4}, tau) == doctest::Approx(-std::log(num / denom)).epsilon(1e-12));
}

TEST_CASE("loss is non-negative and drops as the positive gains") {
  RowVector s(3);
  s << 0.1, 0.2, 0.3;
  const double before = contrastive_nll_from_similarities(s, {0}, 0.1);
  s(0) = 0.9;
  const double after = contrastive_nll_from_similarities(s, {0}, 0.1);
  CHECK(before > after);
  CHECK(after >= 0.0);
}

TEST_CASE("argument checks") {
  const RowVector s = RowVector::Constant(3, 0.1);
  CHECK_THROWS(contrastive_nll_from_similarities(s, {0}, 0.0));
  CHECK_THROWS(contrastive_nll_from_similarities(s, {}, 0.1));
  CHECK_THROWS(contrastive_nll_from_similarities(s, {3}, 0.1));
  CHECK_THROWS(contrastive_nll_from_similarities(s, {1, 1}, 0.1));
  CHECK_THROWS(cosine_similarity(RowVector::Zero(3), s));
}

TEST_CASE("tape loss equals the value loss and has correct gradients") {
  Parameter anchor("a", random_matrix(1, 4, 1));
  Parameter cands("c", random_matrix(3, 4, 2));
  const auto loss = [&](Tape& t) {
    const Var c = t.parameter(cands);
    return contrastive_nll(t.parameter(anchor), {select_rows(c, {0}), select_rows(c, {1}), select_rows(c, {2})}, {0, 2},
                           0.3);
  };
  Tape t;
  CHECK(loss(t).scalar() ==
        doctest::Approx(contrastive_nll(anchor.value.row(0), cands.value, {0, 2}, 0.3)).epsilon(1e-12));
  CHECK(check_gradients({&anchor, &cands}, loss).max_relative_error < 1e-6);
}
