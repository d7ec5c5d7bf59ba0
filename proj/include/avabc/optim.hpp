#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace avabc {

enum class OptimizerKind { kAdam, kAdagrad };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double stabilizer = 1e-8;  // eta

  static OptimizerSpec adam(double learning_rate = 0.01);
  static OptimizerSpec adagrad(double learning_rate = 0.1);
  void validate() const;
};

/// Per-parameter adaptive step sizes.
///   ADAM:    m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
///            phi <- phi +/- a (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eta)
///   ADAGRAD: G <- G + g^2;  phi <- phi +/- a g / (sqrt(G) + eta)
class OptimizerState {
 public:
  OptimizerState(OptimizerSpec spec, std::size_t dim);

  /// One step; ascent when `maximize`. Throws on non-finite gradients
  /// without touching the state.
  std::vector<double> step(std::span<const double> phi, std::span<const double> grad, bool maximize = true);

  const OptimizerSpec& spec() const { return spec_; }
  std::size_t step_count() const { return t_; }
  const std::vector<double>& first_moment() const { return m_; }
  const std::vector<double>& second_moment() const { return v_; }

 private:
  OptimizerSpec spec_;
  std::size_t t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;  // ADAM second moment or ADAGRAD accumulator
};

}  // namespace avabc
