#include "avabc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace avabc {

namespace {

[[noreturn]] void domain_fail(OpKind op, double x, const char* what) {
  std::ostringstream os;
  os.precision(17);
  os << op_name(op) << ": " << what << " (got " << x << ")";
  throw AutodiffError(os.str());
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw AutodiffError("operation on a variable that is not attached to a tape");
  return *a.tape();
}

Tape& tape_of(std::span<const Var> xs, OpKind op) {
  if (xs.empty()) throw AutodiffError(std::string(op_name(op)) + ": empty input");
  Tape& t = tape_of(xs.front());
  for (const Var& x : xs) {
    if (x.tape() != &t) throw AutodiffError(std::string(op_name(op)) + ": arguments live on different tapes");
  }
  return t;
}

}  // namespace

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kConstant: return "constant";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kDiv: return "div";
    case OpKind::kNeg: return "neg";
    case OpKind::kExp: return "exp";
    case OpKind::kLog: return "log";
    case OpKind::kLog1p: return "log1p";
    case OpKind::kExpm1: return "expm1";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kPow: return "pow";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSum: return "sum";
    case OpKind::kMean: return "mean";
    case OpKind::kMin: return "min";
    case OpKind::kMax: return "max";
    case OpKind::kLogSumExp: return "log_sum_exp";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Gradient

double Gradient::operator[](const Var& root) const {
  if (tape_ == nullptr || root.tape() != tape_) {
    throw AutodiffError("gradient requested for a variable from another tape");
  }
  if (!tape_->is_root(root)) {
    throw AutodiffError("gradient requested for a non-input variable");
  }
  return root.id() < adjoint_.size() ? adjoint_[root.id()] : 0.0;
}

std::vector<double> Gradient::wrt(std::span<const Var> roots) const {
  std::vector<double> out;
  out.reserve(roots.size());
  for (const Var& r : roots) out.push_back((*this)[r]);
  return out;
}

// ---------------------------------------------------------------------------
// Tape

Var Tape::push(OpKind kind, double value) {
  const auto id = static_cast<std::uint32_t>(values_.size());
  nodes_.push_back(Node{static_cast<std::uint32_t>(args_.size()), 0, kind});
  values_.push_back(value);
  is_root_.push_back(false);
  return Var(this, id, value);
}

Var Tape::lift(double x) {
  if (!std::isfinite(x)) domain_fail(OpKind::kInput, x, "input must be finite");
  Var v = push(OpKind::kInput, x);
  roots_.push_back(v.id());
  is_root_.back() = true;
  return v;
}

Var Tape::constant(double x) {
  if (!std::isfinite(x)) domain_fail(OpKind::kConstant, x, "constant must be finite");
  return push(OpKind::kConstant, x);
}

bool Tape::is_root(const Var& v) const {
  return v.tape() == this && v.id() < is_root_.size() && is_root_[v.id()];
}

OpKind Tape::kind(const Var& v) const {
  check(v);
  return nodes_[v.id()].kind;
}

void Tape::check(const Var& v) const {
  if (v.tape() != this || v.id() >= values_.size()) {
    throw AutodiffError("variable is not recorded on this tape");
  }
}

Var Tape::unary(OpKind kind, const Var& a, double value, double da) {
  check(a);
  Var v = push(kind, value);
  nodes_.back().arg_count = 1;
  args_.push_back(a.id());
  partials_.push_back(da);
  return v;
}

Var Tape::binary(OpKind kind, const Var& a, const Var& b, double value, double da, double db) {
  check(a);
  check(b);
  Var v = push(kind, value);
  nodes_.back().arg_count = 2;
  args_.push_back(a.id());
  args_.push_back(b.id());
  partials_.push_back(da);
  partials_.push_back(db);
  return v;
}

Var Tape::nary(OpKind kind, std::span<const Var> args, double value, std::span<const double> partials) {
  for (const Var& a : args) check(a);
  Var v = push(kind, value);
  nodes_.back().arg_count = static_cast<std::uint32_t>(args.size());
  for (std::size_t i = 0; i < args.size(); ++i) {
    args_.push_back(args[i].id());
    partials_.push_back(partials[i]);
  }
  return v;
}

Gradient Tape::backward(const Var& output) const {
  if (output.tape() != this || output.id() >= values_.size()) {
    throw AutodiffError("backward: output is not recorded on this tape");
  }
  Gradient g;
  g.tape_ = this;
  g.adjoint_.assign(output.id() + 1, 0.0);
  g.adjoint_[output.id()] = 1.0;
  for (std::int64_t i = output.id(); i >= 0; --i) {
    const double adj = g.adjoint_[i];
    if (adj == 0.0) continue;
    const Node& n = nodes_[i];
    for (std::uint32_t k = 0; k < n.arg_count; ++k) {
      g.adjoint_[args_[n.arg_begin + k]] += adj * partials_[n.arg_begin + k];
    }
  }
  return g;
}

void Tape::rewind(std::size_t mark) {
  if (mark > values_.size()) throw AutodiffError("rewind past the end of the tape");
  if (mark == values_.size()) return;
  const std::uint32_t arg_end = nodes_[mark].arg_begin;
  nodes_.resize(mark);
  values_.resize(mark);
  is_root_.resize(mark);
  args_.resize(arg_end);
  partials_.resize(arg_end);
  while (!roots_.empty() && roots_.back() >= mark) roots_.pop_back();
}

void Tape::clear() { rewind(0); }

// ---------------------------------------------------------------------------
// Arithmetic

Var operator+(const Var& a, const Var& b) {
  return tape_of(a).binary(OpKind::kAdd, a, b, a.value() + b.value(), 1.0, 1.0);
}
Var operator-(const Var& a, const Var& b) {
  return tape_of(a).binary(OpKind::kSub, a, b, a.value() - b.value(), 1.0, -1.0);
}
Var operator*(const Var& a, const Var& b) {
  return tape_of(a).binary(OpKind::kMul, a, b, a.value() * b.value(), b.value(), a.value());
}
Var operator/(const Var& a, const Var& b) {
  if (b.value() == 0.0) domain_fail(OpKind::kDiv, b.value(), "division by zero");
  const double inv = 1.0 / b.value();
  const double q = a.value() * inv;
  return tape_of(a).binary(OpKind::kDiv, a, b, a.value() / b.value(), inv, -q * inv);
}
Var operator-(const Var& a) { return tape_of(a).unary(OpKind::kNeg, a, -a.value(), -1.0); }

Var operator+(const Var& a, double b) { return tape_of(a).unary(OpKind::kAdd, a, a.value() + b, 1.0); }
Var operator+(double a, const Var& b) { return b + a; }
Var operator-(const Var& a, double b) { return tape_of(a).unary(OpKind::kSub, a, a.value() - b, 1.0); }
Var operator-(double a, const Var& b) { return tape_of(b).unary(OpKind::kSub, b, a - b.value(), -1.0); }
Var operator*(const Var& a, double b) { return tape_of(a).unary(OpKind::kMul, a, a.value() * b, b); }
Var operator*(double a, const Var& b) { return b * a; }
Var operator/(const Var& a, double b) {
  if (b == 0.0) domain_fail(OpKind::kDiv, b, "division by zero");
  return tape_of(a).unary(OpKind::kDiv, a, a.value() / b, 1.0 / b);
}
Var operator/(double a, const Var& b) {
  if (b.value() == 0.0) domain_fail(OpKind::kDiv, b.value(), "division by zero");
  const double q = a / b.value();
  return tape_of(b).unary(OpKind::kDiv, b, q, -q / b.value());
}

// ---------------------------------------------------------------------------
// Elementary functions

Var exp(const Var& x) {
  const double e = std::exp(x.value());
  return tape_of(x).unary(OpKind::kExp, x, e, e);
}

Var log(const Var& x) {
  if (!(x.value() > 0.0)) domain_fail(OpKind::kLog, x.value(), "argument must be > 0");
  return tape_of(x).unary(OpKind::kLog, x, std::log(x.value()), 1.0 / x.value());
}

Var log1p(const Var& x) {
  if (!(x.value() > -1.0)) domain_fail(OpKind::kLog1p, x.value(), "argument must be > -1");
  return tape_of(x).unary(OpKind::kLog1p, x, std::log1p(x.value()), 1.0 / (1.0 + x.value()));
}

Var expm1(const Var& x) {
  return tape_of(x).unary(OpKind::kExpm1, x, std::expm1(x.value()), std::exp(x.value()));
}

Var sqrt(const Var& x) {
  if (!(x.value() >= 0.0)) domain_fail(OpKind::kSqrt, x.value(), "argument must be >= 0");
  const double r = std::sqrt(x.value());
  // The derivative is +inf at 0; keep it so misuse shows up as a non-finite gradient.
  return tape_of(x).unary(OpKind::kSqrt, x, r, 0.5 / r);
}

Var tanh(const Var& x) {
  const double t = std::tanh(x.value());
  return tape_of(x).unary(OpKind::kTanh, x, t, 1.0 - t * t);
}

Var square(const Var& x) { return tape_of(x).unary(OpKind::kMul, x, x.value() * x.value(), 2.0 * x.value()); }

Var pow(const Var& base, double exponent) {
  const double b = base.value();
  if (b < 0.0 && exponent != std::floor(exponent)) {
    domain_fail(OpKind::kPow, b, "negative base with non-integer exponent");
  }
  if (b == 0.0 && exponent < 1.0) domain_fail(OpKind::kPow, b, "zero base with exponent < 1");
  const double v = std::pow(b, exponent);
  return tape_of(base).unary(OpKind::kPow, base, v, exponent * std::pow(b, exponent - 1.0));
}

Var pow(const Var& base, const Var& exponent) {
  const double b = base.value();
  if (!(b > 0.0)) domain_fail(OpKind::kPow, b, "base must be > 0 for a variable exponent");
  const double e = exponent.value();
  const double v = std::pow(b, e);
  return tape_of(base).binary(OpKind::kPow, base, exponent, v, e * std::pow(b, e - 1.0), v * std::log(b));
}

// ---------------------------------------------------------------------------
// Collections

Var sum(std::span<const Var> xs) {
  Tape& t = tape_of(xs, OpKind::kSum);
  double s = 0.0;
  for (const Var& x : xs) s += x.value();
  std::vector<double> partials(xs.size(), 1.0);
  return t.nary(OpKind::kSum, xs, s, partials);
}

Var mean(std::span<const Var> xs) {
  Tape& t = tape_of(xs, OpKind::kMean);
  double s = 0.0;
  for (const Var& x : xs) s += x.value();
  const double w = 1.0 / static_cast<double>(xs.size());
  std::vector<double> partials(xs.size(), w);
  return t.nary(OpKind::kMean, xs, s * w, partials);
}

namespace {

Var extremum(std::span<const Var> xs, OpKind op, bool want_max) {
  Tape& t = tape_of(xs, op);
  std::size_t best = 0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const bool better = want_max ? xs[i].value() > xs[best].value() : xs[i].value() < xs[best].value();
    if (better) best = i;
  }
  return t.unary(op, xs[best], xs[best].value(), 1.0);
}

}  // namespace

Var min(std::span<const Var> xs) { return extremum(xs, OpKind::kMin, false); }
Var max(std::span<const Var> xs) { return extremum(xs, OpKind::kMax, true); }

Var log_sum_exp(std::span<const Var> xs) {
  Tape& t = tape_of(xs, OpKind::kLogSumExp);
  double m = xs.front().value();
  for (const Var& x : xs) m = std::max(m, x.value());
  if (!std::isfinite(m)) domain_fail(OpKind::kLogSumExp, m, "terms must be finite");
  std::vector<double> w(xs.size());
  double z = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    w[i] = std::exp(xs[i].value() - m);
    z += w[i];
  }
  for (double& wi : w) wi /= z;
  return t.nary(OpKind::kLogSumExp, xs, m + std::log(z), w);
}

std::vector<double> values(std::span<const Var> xs) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (const Var& x : xs) out.push_back(x.value());
  return out;
}

}  // namespace avabc
