#include "relcl/optim.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace relcl {

Adam::Adam(std::vector<Parameter*> params, AdamConfig config) : params_(std::move(params)), config_(config) {
  for (const auto* p : params_) {
    first_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    second_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::step() {
  ++steps_;
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(config_.beta1, t);
  const double correction2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    if (!p.trainable) continue;
    first_[i] = config_.beta1 * first_[i] + (1.0 - config_.beta1) * p.grad;
    second_[i] = config_.beta2 * second_[i] + (1.0 - config_.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= config_.learning_rate * (first_[i].array() / correction1) /
                       ((second_[i].array() / correction2).sqrt() + config_.epsilon);
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

GradientCheckResult check_gradients(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& loss,
                                    double step, double floor) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    const Var out = loss(tape);
    tape.backward(out);
  }
  auto evaluate = [&] {
    Tape tape;
    return loss(tape).scalar();
  };
  GradientCheckResult result;
  for (auto* p : params) {
    if (!p->trainable) continue;
    const Matrix analytic = p->grad;
    for (Index i = 0; i < p->value.size(); ++i) {
      double& entry = p->value.data()[i];
      const double saved = entry;
      entry = saved + step;
      const double up = evaluate();
      entry = saved - step;
      const double down = evaluate();
      entry = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.data()[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++result.entries_checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  for (auto* p : params) p->zero_grad();
  return result;
}

namespace {

constexpr char kMagic[8] = {'R', 'E', 'L', 'C', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::ostream& out, T v) {
  char bytes[sizeof v];
  std::memcpy(bytes, &v, sizeof v);
  out.write(bytes, sizeof bytes);
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  char bytes[sizeof(T)];
  if (!in.read(bytes, sizeof bytes)) throw ParseError("truncated checkpoint " + path.string());
  T v;
  std::memcpy(&v, bytes, sizeof v);
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedMatrix>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, entries.size());
  for (const auto& e : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::int64_t>(out, e.value.rows());
    put<std::int64_t>(out, e.value.cols());
    for (Index r = 0; r < e.value.rows(); ++r) {
      for (Index c = 0; c < e.value.cols(); ++c) put<double>(out, e.value(r, c));
    }
  }
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw ParseError("not a checkpoint file: " + path.string());
  }
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) throw ParseError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint64_t>(in, path);
  std::vector<NamedMatrix> entries;
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedMatrix e;
    const auto len = get<std::uint32_t>(in, path);
    e.name.resize(len);
    if (!in.read(e.name.data(), len)) throw ParseError("truncated checkpoint " + path.string());
    const auto rows = get<std::int64_t>(in, path);
    const auto cols = get<std::int64_t>(in, path);
    if (rows < 0 || cols < 0) throw ParseError("negative shape in checkpoint " + path.string());
    e.value.resize(rows, cols);
    for (Index r = 0; r < rows; ++r) {
      for (Index c = 0; c < cols; ++c) e.value(r, c) = get<double>(in, path);
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<NamedMatrix> snapshot(const std::vector<Parameter*>& params) {
  std::vector<NamedMatrix> out;
  out.reserve(params.size());
  for (const auto* p : params) out.push_back({p->name, p->value});
  return out;
}

void restore(const std::vector<Parameter*>& params, const std::vector<NamedMatrix>& entries) {
  std::map<std::string, const Matrix*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e.value;
  for (auto* p : params) {
    const auto it = by_name.find(p->name);
    if (it == by_name.end()) throw ParseError("checkpoint lacks parameter '" + p->name + "'");
    if (it->second->rows() != p->value.rows() || it->second->cols() != p->value.cols()) {
      throw ShapeError("checkpoint parameter '" + p->name + "' has the wrong shape");
    }
    p->value = *it->second;
    p->zero_grad();
  }
}

}  // namespace relcl
