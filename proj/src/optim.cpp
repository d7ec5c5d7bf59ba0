#include "avabc/optim.hpp"

#include <cmath>
#include <sstream>

#include "avabc/error.hpp"

namespace avabc {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::kAdam ? "adam" : "adagrad"; }

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "adagrad") return OptimizerKind::kAdagrad;
  throw Error("unknown optimizer '" + name + "' (expected adam or adagrad)");
}

OptimizerSpec OptimizerSpec::adam(double learning_rate) {
  OptimizerSpec s;
  s.kind = OptimizerKind::kAdam;
  s.learning_rate = learning_rate;
  return s;
}

OptimizerSpec OptimizerSpec::adagrad(double learning_rate) {
  OptimizerSpec s;
  s.kind = OptimizerKind::kAdagrad;
  s.learning_rate = learning_rate;
  return s;
}

void OptimizerSpec::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw Error("optimizer: learning rate must be > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error("optimizer: beta1 and beta2 must lie in [0, 1)");
  }
  if (!(stabilizer > 0.0)) throw Error("optimizer: stabilizer must be > 0");
}

OptimizerState::OptimizerState(OptimizerSpec spec, std::size_t dim) : spec_(spec), m_(dim, 0.0), v_(dim, 0.0) {
  spec_.validate();
}

std::vector<double> OptimizerState::step(std::span<const double> phi, std::span<const double> grad, bool maximize) {
  if (phi.size() != m_.size() || grad.size() != m_.size()) throw Error("optimizer: dimension mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i])) {
      std::ostringstream os;
      os << "optimizer: non-finite gradient component " << i << " (" << grad[i] << ")";
      throw Error(os.str());
    }
  }
  ++t_;
  const double sign = maximize ? 1.0 : -1.0;
  const double a = spec_.learning_rate;
  std::vector<double> out(phi.begin(), phi.end());
  if (spec_.kind == OptimizerKind::kAdam) {
    const double c1 = 1.0 - std::pow(spec_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(spec_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < out.size(); ++i) {
      m_[i] = spec_.beta1 * m_[i] + (1.0 - spec_.beta1) * grad[i];
      v_[i] = spec_.beta2 * v_[i] + (1.0 - spec_.beta2) * grad[i] * grad[i];
      out[i] += sign * a * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + spec_.stabilizer);
    }
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      v_[i] += grad[i] * grad[i];
      out[i] += sign * a * grad[i] / (std::sqrt(v_[i]) + spec_.stabilizer);
    }
  }
  return out;
}

}  // namespace avabc
