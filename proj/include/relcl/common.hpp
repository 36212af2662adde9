#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace relcl {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (record, sidecar, checkpoint, config).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Well-formed input that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Operand shapes that do not compose.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Seeded random stream. Every draw is built directly on mt19937_64 output so
/// sequences are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n).
  std::size_t uniform_index(std::size_t n);

  /// Uniform real in [0, 1) with 53 random bits.
  double uniform();

  double normal();

  bool coin() { return (engine_() >> 63) != 0; }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// FNV-1a over bytes; stable across platforms.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 14695981039346656037ULL);

/// Fingerprint of a matrix's shape and exact bit pattern.
std::uint64_t fingerprint(const Matrix& m, std::uint64_t basis = 14695981039346656037ULL);

std::string hex64(std::uint64_t v);

enum class LogLevel { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

/// Level read once from RELCL_LOG (debug|info|warn|error|off); default warn.
LogLevel log_level();
void log(LogLevel level, std::string_view message);

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

}  // namespace relcl
