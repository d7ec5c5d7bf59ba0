#pragma once

// Scalar reverse-mode automatic differentiation.
//
// A Tape records every operation as a node holding its value, its parent ids
// and the local partial derivatives with respect to those parents. Parents
// always precede children, so a single reverse sweep accumulates adjoints.
// Tapes are rebuilt for every evaluation (define-by-run) and share no state
// with each other.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace avabc {

class Tape;

/// Raised on domain violations (log of a non-positive number, ...) and on
/// misuse of the tape (foreign or invalid variables).
class AutodiffError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

enum class OpKind : std::uint8_t {
  kInput,
  kConstant,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kNeg,
  kExp,
  kLog,
  kLog1p,
  kExpm1,
  kSqrt,
  kPow,
  kTanh,
  kSum,
  kMean,
  kMin,
  kMax,
  kLogSumExp,
};

const char* op_name(OpKind kind);

/// Handle to one node of a tape. Cheap to copy; only valid while its tape
/// is alive and has not been rewound past it.
class Var {
 public:
  Var() = default;

  double value() const { return value_; }
  std::uint32_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id, double value) : tape_(tape), id_(id), value_(value) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = 0;
  double value_ = 0.0;
};

/// Adjoints produced by one backward sweep.
class Gradient {
 public:
  /// d(output)/d(root). Throws for variables that are not inputs of the tape.
  double operator[](const Var& root) const;
  std::vector<double> wrt(std::span<const Var> roots) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<double> adjoint_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// New independent input. Rejects non-finite values.
  Var lift(double x);
  /// Leaf with no derivative. Rejects non-finite values.
  Var constant(double x);

  std::size_t size() const { return values_.size(); }
  std::span<const std::uint32_t> roots() const { return roots_; }
  bool is_root(const Var& v) const;
  OpKind kind(const Var& v) const;

  /// Reverse sweep from `output`. Every node at or below the output id is
  /// visited exactly once; the tape itself is left untouched, so calling
  /// this twice yields identical adjoints.
  Gradient backward(const Var& output) const;

  /// Truncation point for re-using the prefix of a tape (for example the
  /// transformed variational parameters) across several small sub-graphs.
  std::size_t mark() const { return values_.size(); }
  void rewind(std::size_t mark);
  void clear();

  // Node construction used by the free operators below.
  Var unary(OpKind kind, const Var& a, double value, double da);
  Var binary(OpKind kind, const Var& a, const Var& b, double value, double da, double db);
  Var nary(OpKind kind, std::span<const Var> args, double value, std::span<const double> partials);

  void check(const Var& v) const;

 private:
  struct Node {
    std::uint32_t arg_begin;
    std::uint32_t arg_count;
    OpKind kind;
  };

  Var push(OpKind kind, double value);

  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<std::uint32_t> args_;
  std::vector<double> partials_;
  std::vector<std::uint32_t> roots_;
  std::vector<bool> is_root_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);

Var operator+(const Var& a, double b);
Var operator+(double a, const Var& b);
Var operator-(const Var& a, double b);
Var operator-(double a, const Var& b);
Var operator*(const Var& a, double b);
Var operator*(double a, const Var& b);
Var operator/(const Var& a, double b);
Var operator/(double a, const Var& b);

Var exp(const Var& x);
Var log(const Var& x);
Var log1p(const Var& x);
Var expm1(const Var& x);
Var sqrt(const Var& x);
Var tanh(const Var& x);
Var square(const Var& x);
Var pow(const Var& base, double exponent);
Var pow(const Var& base, const Var& exponent);

// Fused collection ops. All arguments must share one tape; inputs must be
// non-empty. min/max propagate the derivative to the first attaining
// argument on ties.
Var sum(std::span<const Var> xs);
Var mean(std::span<const Var> xs);
Var min(std::span<const Var> xs);
Var max(std::span<const Var> xs);
Var log_sum_exp(std::span<const Var> xs);

std::vector<double> values(std::span<const Var> xs);

}  // namespace avabc
