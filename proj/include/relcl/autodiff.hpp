#pragma once

#include "relcl/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace relcl {

/// A named trainable (or frozen) matrix together with its gradient buffer.
/// Frozen parameters never accumulate gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;

  Parameter() = default;
  Parameter(std::string name, Matrix value, bool trainable = true)
      : name(std::move(name)), value(std::move(value)), trainable(trainable) {
    zero_grad();
  }

  void zero_grad() { grad = Matrix::Zero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to one node of a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const;
};

/// Reverse-mode differentiation over a closed set of matrix primitives.
/// Nodes are appended in evaluation order; backward() walks them in reverse
/// and accumulates into the gradients of reached, trainable Parameters.
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t)>;

  Var constant(Matrix value);
  Var parameter(Parameter& p);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& value(Var v) const { return nodes_[v.id].value; }

  /// Gradient of the last backward() output with respect to `v`.
  Matrix gradient(Var v) const;

  /// `output` must be 1x1.
  void backward(Var output);

  std::size_t size() const { return nodes_.size(); }

  Var push(Matrix value, Backprop backprop);
  /// Gradient buffer of node `id`, allocated on first use.
  Matrix& grad(std::size_t id);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backprop backprop;
    Parameter* parameter = nullptr;
  };
  std::vector<Node> nodes_;
};

enum class Activation { identity, relu, tanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view text);

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1xC row to every row of an RxC matrix.
Var add_row(Var a, Var row);
Var scale(Var a, double factor);
Var tanh(Var a);
Var relu(Var a);
Var activate(Var a, Activation act);
Var exp(Var a);
Var log(Var a);
Var transpose(Var a);
Var softmax_rows(Var a);
Var hconcat(const std::vector<Var>& parts);
Var vconcat(const std::vector<Var>& parts);
Var select_rows(Var a, const std::vector<Index>& rows);
Var select_cols(Var a, const std::vector<Index>& cols);
Var mean_rows(Var a);
/// Column-wise maximum; the gradient routes to the lowest-index argmax.
Var max_rows(Var a);
Var sum(Var a);
/// log(sum(exp(a))) over every entry, evaluated with a max shift.
Var logsumexp(Var a);
/// Cosine similarity of two 1xD rows. A zero row yields similarity 0 and a
/// zero gradient instead of an error.
Var cosine(Var a, Var b);
/// Scales every row to unit length; zero rows stay zero.
Var normalize_rows(Var a);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return matmul(a, b); }

}  // namespace relcl
