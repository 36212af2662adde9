#include "relcl/autodiff.hpp"

#include <cmath>

namespace relcl {

namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

void same_tape(Var a, Var b, const char* op) {
  if (a.tape == nullptr || a.tape != b.tape) throw Error(std::string(op) + ": operands belong to different tapes");
}

void same_shape(Var a, Var b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " + shape(b.value()));
  }
}

}  // namespace

const Matrix& Var::value() const { return tape->value(id); }

double Var::scalar() const {
  const auto& v = value();
  if (v.size() != 1) throw ShapeError("Var::scalar on a " + shape(v) + " node");
  return v(0, 0);
}

Var Tape::constant(Matrix value) { return push(std::move(value), nullptr); }

Var Tape::parameter(Parameter& p) {
  Var v = push(p.value, nullptr);
  nodes_[v.id].parameter = &p;
  return v;
}

Var Tape::push(Matrix value, Backprop backprop) {
  if (!value.allFinite()) throw Error("non-finite value produced on tape");
  nodes_.push_back(Node{std::move(value), Matrix(), std::move(backprop), nullptr});
  return Var{this, nodes_.size() - 1};
}

Matrix& Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.rows() != node.value.rows() || node.grad.cols() != node.value.cols()) {
    node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

Matrix Tape::gradient(Var v) const {
  const auto& node = nodes_[v.id];
  if (node.grad.size() == 0) return Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var output) {
  if (output.tape != this) throw Error("backward: output belongs to another tape");
  if (value(output).size() != 1) throw ShapeError("backward: output must be 1x1, got " + shape(value(output)));
  for (auto& n : nodes_) n.grad.resize(0, 0);
  grad(output.id)(0, 0) = 1.0;
  for (std::size_t i = output.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.size() == 0) continue;
    if (node.backprop) node.backprop(*this, i);
    if (node.parameter != nullptr && node.parameter->trainable) node.parameter->grad += node.grad;
  }
}

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "identity";
}

Activation parse_activation(std::string_view text) {
  if (text == "identity" || text == "none") return Activation::identity;
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  throw ParseError("unknown activation '" + std::string(text) + "'");
}

Var matmul(Var a, Var b) {
  same_tape(a, b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape(a.value()) + " * " + shape(b.value()));
  }
  Matrix out = a.value() * b.value();
  return a.tape->push(std::move(out), [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g * t.value(ib).transpose();
    t.grad(ib) += t.value(ia).transpose() * g;
  });
}

Var add(Var a, Var b) {
  same_tape(a, b, "add");
  same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  return a.tape->push(std::move(out), [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g;
    t.grad(ib) += g;
  });
}

Var sub(Var a, Var b) {
  same_tape(a, b, "sub");
  same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  return a.tape->push(std::move(out), [ia = a.id, ib = b.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g;
    t.grad(ib) -= g;
  });
}

Var add_row(Var a, Var row) {
  same_tape(a, row, "add_row");
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw ShapeError("add_row: cannot broadcast " + shape(row.value()) + " over " + shape(a.value()));
  }
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape->push(std::move(out), [ia = a.id, ir = row.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g;
    t.grad(ir) += g.colwise().sum();
  });
}

Var scale(Var a, double factor) {
  Matrix out = a.value() * factor;
  return a.tape->push(std::move(out), [ia = a.id, factor](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g * factor;
  });
}

Var tanh(Var a) {
  Matrix out = a.value().array().tanh().matrix();
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix g = t.grad(self);
    t.grad(ia).array() += g.array() * (1.0 - y.array().square());
  });
}

Var relu(Var a) {
  Matrix out = a.value().cwiseMax(0.0);
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    const Matrix& x = t.value(ia);
    t.grad(ia).array() += (x.array() > 0.0).select(g.array(), 0.0);
  });
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::relu: return relu(a);
    case Activation::tanh: return tanh(a);
    case Activation::identity: break;
  }
  return a;
}

Var exp(Var a) {
  Matrix out = a.value().array().exp().matrix();
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    t.grad(ia).array() += g.array() * t.value(self).array();
  });
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any()) throw Error("log: nonpositive input");
  Matrix out = a.value().array().log().matrix();
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    t.grad(ia).array() += g.array() / t.value(ia).array();
  });
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    t.grad(ia) += g.transpose();
  });
}

Var softmax_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (Index r = 0; r < x.rows(); ++r) {
    const RowVector e = (x.row(r).array() - x.row(r).maxCoeff()).exp().matrix();
    out.row(r) = e / e.sum();
  }
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (Index r = 0; r < y.rows(); ++r) {
      const double dot = g.row(r).dot(y.row(r));
      ga.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var hconcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("hconcat: no operands");
  Index cols = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "hconcat");
    if (p.rows() != parts.front().rows()) throw ShapeError("hconcat: row count mismatch");
    cols += p.cols();
  }
  Matrix out(parts.front().rows(), cols);
  Index at = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    ids.push_back(p.id);
  }
  return parts.front().tape->push(std::move(out), [ids](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    Index at = 0;
    for (auto id : ids) {
      const Index c = t.value(id).cols();
      t.grad(id) += g.middleCols(at, c);
      at += c;
    }
  });
}

Var vconcat(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("vconcat: no operands");
  Index rows = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "vconcat");
    if (p.cols() != parts.front().cols()) throw ShapeError("vconcat: column count mismatch");
    rows += p.rows();
  }
  Matrix out(rows, parts.front().cols());
  Index at = 0;
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    ids.push_back(p.id);
  }
  return parts.front().tape->push(std::move(out), [ids](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    Index at = 0;
    for (auto id : ids) {
      const Index r = t.value(id).rows();
      t.grad(id) += g.middleRows(at, r);
      at += r;
    }
  });
}

Var select_rows(Var a, const std::vector<Index>& rows) {
  const Matrix& x = a.value();
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= x.rows()) {
      throw ShapeError("select_rows: row " + std::to_string(rows[i]) + " outside " + shape(x));
    }
    out.row(static_cast<Index>(i)) = x.row(rows[i]);
  }
  return a.tape->push(std::move(out), [ia = a.id, rows](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < rows.size(); ++i) ga.row(rows[i]) += g.row(static_cast<Index>(i));
  });
}

Var select_cols(Var a, const std::vector<Index>& cols) {
  const Matrix& x = a.value();
  Matrix out(x.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (cols[i] < 0 || cols[i] >= x.cols()) {
      throw ShapeError("select_cols: column " + std::to_string(cols[i]) + " outside " + shape(x));
    }
    out.col(static_cast<Index>(i)) = x.col(cols[i]);
  }
  return a.tape->push(std::move(out), [ia = a.id, cols](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < cols.size(); ++i) ga.col(cols[i]) += g.col(static_cast<Index>(i));
  });
}

Var mean_rows(Var a) {
  if (a.rows() == 0) throw ShapeError("mean_rows: empty matrix");
  Matrix out = a.value().colwise().mean();
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    Matrix& ga = t.grad(ia);
    ga.rowwise() += g.row(0) / static_cast<double>(ga.rows());
  });
}

Var max_rows(Var a) {
  const Matrix& x = a.value();
  if (x.rows() == 0) throw ShapeError("max_rows: empty matrix");
  Matrix out(1, x.cols());
  std::vector<Index> argmax(static_cast<std::size_t>(x.cols()), 0);
  for (Index c = 0; c < x.cols(); ++c) {
    Index best = 0;
    for (Index r = 1; r < x.rows(); ++r) {
      if (x(r, c) > x(best, c)) best = r;
    }
    argmax[static_cast<std::size_t>(c)] = best;
    out(0, c) = x(best, c);
  }
  return a.tape->push(std::move(out), [ia = a.id, argmax](Tape& t, std::size_t self) {
    const Matrix g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t c = 0; c < argmax.size(); ++c) {
      ga(argmax[c], static_cast<Index>(c)) += g(0, static_cast<Index>(c));
    }
  });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    t.grad(ia).array() += g;
  });
}

Var logsumexp(Var a) {
  const Matrix& x = a.value();
  if (x.size() == 0) throw ShapeError("logsumexp: empty matrix");
  const double shift = x.maxCoeff();
  Matrix out(1, 1);
  out(0, 0) = shift + std::log((x.array() - shift).exp().sum());
  return a.tape->push(std::move(out), [ia = a.id](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    const double lse = t.value(self)(0, 0);
    t.grad(ia).array() += g * (t.value(ia).array() - lse).exp();
  });
}

Var cosine(Var a, Var b) {
  same_tape(a, b, "cosine");
  if (a.rows() != 1 || b.rows() != 1 || a.cols() != b.cols()) {
    throw ShapeError("cosine: expected two 1xD rows, got " + shape(a.value()) + " and " + shape(b.value()));
  }
  const double na = a.value().norm();
  const double nb = b.value().norm();
  Matrix out = Matrix::Zero(1, 1);
  const bool defined = na > 0.0 && nb > 0.0;
  if (defined) out(0, 0) = a.value().row(0).dot(b.value().row(0)) / (na * nb);
  return a.tape->push(std::move(out), [ia = a.id, ib = b.id, na, nb, defined](Tape& t, std::size_t self) {
    if (!defined) return;
    const double g = t.grad(self)(0, 0);
    const double c = t.value(self)(0, 0);
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(ib);
    t.grad(ia) += g * (y / (na * nb) - c * x / (na * na));
    t.grad(ib) += g * (x / (na * nb) - c * y / (nb * nb));
  });
}

Var normalize_rows(Var a) {
  const Matrix& x = a.value();
  Matrix out = Matrix::Zero(x.rows(), x.cols());
  RowVector norms(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    norms(r) = x.row(r).norm();
    if (norms(r) > 0.0) out.row(r) = x.row(r) / norms(r);
  }
  return a.tape->push(std::move(out), [ia = a.id, norms](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (Index r = 0; r < y.rows(); ++r) {
      if (norms(r) == 0.0) continue;
      ga.row(r) += (g.row(r) - y.row(r) * g.row(r).dot(y.row(r))) / norms(r);
    }
  });
}

}  // namespace relcl
