#include "support.hpp"

using namespace relcl;
using relcl::testing::random_matrix;

namespace {

/// Worst relative error of an op applied to one random parameter.
double op_error(Index rows, Index cols, const std::function<Var(Tape&, Var)>& op, std::uint64_t seed = 1) {
  Parameter p("p", random_matrix(rows, cols, seed));
  return check_gradients({&p}, [&](Tape& t) { return op(t, t.parameter(p)); }).max_relative_error;
}

Var weighted_sum(Tape& t, Var x, std::uint64_t seed) {
  // A random linear read-out keeps the output gradients distinct per entry.
  return sum(hconcat({sum(matmul(x, t.constant(random_matrix(x.cols(), 1, seed))))}));
}

}  // namespace

TEST_CASE("elementwise and reduction ops pass a gradient check") {
  CHECK(op_error(3, 4, [](Tape& t, Var x) { return weighted_sum(t, tanh(x), 2); }) < 1e-6);
  CHECK(op_error(3, 4, [](Tape& t, Var x) { return weighted_sum(t, exp(scale(x, 0.5)), 2); }) < 1e-6);
  CHECK(op_error(3, 4, [](Tape& t, Var x) { return weighted_sum(t, log(add(exp(x), t.constant(Matrix::Ones(3, 4)))), 3); }) < 1e-6);
  CHECK(op_error(3, 4, [](Tape&, Var x) { return logsumexp(x); }) < 1e-6);
  CHECK(op_error(3, 4, [](Tape& t, Var x) { return weighted_sum(t, softmax_rows(x), 4); }) < 1e-6);
  CHECK(op_error(3, 4, [](Tape& t, Var x) { return weighted_sum(t, mean_rows(x), 5); }) < 1e-6);
  CHECK(op_error(3, 4, [](Tape& t, Var x) { return weighted_sum(t, max_rows(x), 5); }) < 1e-6);
  CHECK(op_error(3, 4, [](Tape& t, Var x) { return weighted_sum(t, normalize_rows(x), 6); }) < 1e-6);
  CHECK(op_error(3, 4, [](Tape& t, Var x) { return weighted_sum(t, transpose(x), 7); }) < 1e-6);
  CHECK(op_error(1, 5, [](Tape& t, Var x) { return cosine(x, t.constant(random_matrix(1, 5, 8))); }) < 1e-6);
}

TEST_CASE("structural ops pass a gradient check") {
  CHECK(op_error(4, 3, [](Tape& t, Var x) { return weighted_sum(t, select_rows(x, {3, 0, 3}), 2); }) < 1e-6);
  CHECK(op_error(4, 3, [](Tape& t, Var x) { return weighted_sum(t, select_cols(x, {2, 2, 1}), 2); }) < 1e-6);
  CHECK(op_error(2, 3, [](Tape& t, Var x) { return weighted_sum(t, vconcat({x, scale(x, 2.0)}), 3); }) < 1e-6);
  CHECK(op_error(2, 3, [](Tape& t, Var x) { return weighted_sum(t, hconcat({x, tanh(x)}), 3); }) < 1e-6);
  CHECK(op_error(2, 3, [](Tape& t, Var x) {
          return weighted_sum(t, add_row(matmul(x, t.constant(random_matrix(3, 2, 4))), t.constant(random_matrix(1, 2, 5))), 6);
        }) < 1e-6);
}

TEST_CASE("relu gradient away from the kink") {
  Parameter p("p", Matrix::Constant(2, 2, 0.5));
  p.value(0, 1) = -0.7;
  Tape t;
  const Var y = sum(relu(t.parameter(p)));
  t.backward(y);
  CHECK(p.grad(0, 0) == 1.0);
  CHECK(p.grad(0, 1) == 0.0);
}

TEST_CASE("gradients accumulate over reuse and skip frozen parameters") {
  Parameter p("p", Matrix::Constant(1, 1, 3.0));
  Parameter frozen("f", Matrix::Constant(1, 1, 2.0), false);
  Tape t;
  const Var x = t.parameter(p);
  const Var y = matmul(x, x) + matmul(x, t.parameter(frozen));
  t.backward(y);
  CHECK(p.grad(0, 0) == doctest::Approx(2 * 3.0 + 2.0));
  CHECK(frozen.grad(0, 0) == 0.0);
}

TEST_CASE("backward needs a scalar and rejects non-finite values") {
  Tape t;
  const Var x = t.constant(Matrix::Ones(2, 2));
  CHECK_THROWS(t.backward(x));
  CHECK_THROWS(log(scale(x, 0.0)));
  CHECK_THROWS_AS(matmul(x, t.constant(Matrix::Ones(3, 1))), ShapeError);
}

TEST_CASE("cosine against a zero row is zero with no gradient") {
  Parameter p("p", random_matrix(1, 4, 2));
  Tape t;
  const Var c = cosine(t.parameter(p), t.constant(Matrix::Zero(1, 4)));
  CHECK(c.scalar() == 0.0);
  t.backward(c);
  CHECK(p.grad.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("max over rows sends the gradient to the first maximum") {
  Parameter p("p", Matrix::Constant(2, 1, 1.0));
  Tape t;
  t.backward(sum(max_rows(t.parameter(p))));
  CHECK(p.grad(0, 0) == 1.0);
  CHECK(p.grad(1, 0) == 0.0);
}
