#pragma once

#include "relcl/autodiff.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace relcl {

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// ADAM with bias correction. Moments are kept per parameter, in the order
/// the parameters were registered.
class Adam {
 public:
  Adam(std::vector<Parameter*> params, AdamConfig config);

  /// Updates every trainable parameter from its gradient, then zeroes all
  /// gradients. Frozen parameters are left untouched.
  void step();
  void zero_grad();

  std::size_t step_count() const { return steps_; }
  const AdamConfig& config() const { return config_; }
  const Matrix& first_moment(std::size_t i) const { return first_[i]; }
  const Matrix& second_moment(std::size_t i) const { return second_[i]; }

 private:
  std::vector<Parameter*> params_;
  std::vector<Matrix> first_;
  std::vector<Matrix> second_;
  AdamConfig config_;
  std::size_t steps_ = 0;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
  std::string worst_parameter;
};

/// Compares reverse-mode gradients of `loss` against central finite
/// differences for every entry of every trainable parameter. The relative
/// error of an entry is |a - n| / max(|a|, |n|, floor).
GradientCheckResult check_gradients(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& loss,
                                    double step = 1e-4, double floor = 1e-6);

/// Named matrix as stored in a checkpoint.
struct NamedMatrix {
  std::string name;
  Matrix value;
};

/// Binary checkpoint: magic "RELCLCKP", u32 version, u64 count, then per
/// entry u32 name length, name bytes, i64 rows, i64 cols and row-major f64
/// values. Little-endian.
void write_checkpoint(const std::filesystem::path& path, const std::vector<NamedMatrix>& entries);
std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path);

std::vector<NamedMatrix> snapshot(const std::vector<Parameter*>& params);
/// Copies values by name into `params`; every parameter must be present with
/// a matching shape.
void restore(const std::vector<Parameter*>& params, const std::vector<NamedMatrix>& entries);

}  // namespace relcl
