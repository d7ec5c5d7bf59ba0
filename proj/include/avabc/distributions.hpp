#pragma once

// Reparameterizable variational families theta = g(phi, nu), nu ~ Q0, and
// the priors they are compared against.
//
// Variational parameters are stored unconstrained: positive quantities are
// kept as logarithms, so any real-valued optimizer step stays valid.
//
//   Kumaraswamy       phi = (log a, log b)          nu ~ U(0,1)     theta in (0,1)
//   LogNormal         phi = (mu, log sigma)         nu ~ N(0,1)     theta > 0
//   DiagonalGaussian  phi = (mu_1..mu_d, log s_1..log s_d)  nu ~ N(0,I)

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "avabc/autodiff.hpp"
#include "avabc/rng.hpp"

namespace avabc {

enum class FamilyKind { kKumaraswamy, kLogNormal, kDiagonalGaussian };
enum class BaseKind { kUniform, kStandardNormal };
enum class Support { kUnitInterval, kPositive, kReal };

std::string to_string(FamilyKind kind);
FamilyKind family_kind_from_string(const std::string& name);

class VariationalFamily {
 public:
  static VariationalFamily kumaraswamy(double a, double b);
  static VariationalFamily log_normal(double mu, double sigma);
  static VariationalFamily diagonal_gaussian(std::vector<double> mu, std::vector<double> sigma);
  /// Rebuild from unconstrained parameters (as stored in traces).
  static VariationalFamily from_phi(FamilyKind kind, std::vector<double> phi);
  /// Inverse of constrained().
  static VariationalFamily from_constrained(FamilyKind kind, std::span<const double> params);

  FamilyKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }
  std::size_t num_params() const { return phi_.size(); }
  BaseKind base() const;
  Support support() const;
  const std::vector<double>& phi() const { return phi_; }
  VariationalFamily with_phi(std::vector<double> phi) const;

  std::vector<std::string> param_names() const;
  /// Parameters in their natural scale: (a, b), (mu, sigma) or (mu..., sigma...).
  std::vector<double> constrained() const;

  /// phi as fresh inputs of `tape`.
  std::vector<Var> lift(Tape& tape) const;
  /// phi as constants (no gradient).
  std::vector<Var> freeze(Tape& tape) const;

  /// Draw nu ~ Q0 of length dim().
  std::vector<double> draw_base(Engine& eng) const;

  /// theta = g(phi, nu), differentiable in phi.
  std::vector<Var> sample(std::span<const Var> phi, std::span<const double> nu) const;
  std::vector<double> sample(std::span<const double> nu) const;

  /// log q_phi(theta), differentiable in phi and theta. Throws outside the
  /// support instead of returning -inf.
  Var log_pdf(std::span<const Var> phi, std::span<const Var> theta) const;
  double log_pdf(std::span<const double> theta) const;

  std::vector<double> mean() const;
  std::vector<double> variance() const;

 private:
  VariationalFamily(FamilyKind kind, std::size_t dim, std::vector<double> phi);
  void check_phi(std::span<const Var> phi) const;

  FamilyKind kind_;
  std::size_t dim_;
  std::vector<double> phi_;
};

/// (1 - (1 - nu)^(1/b))^(1/a), the Kumaraswamy(a, b) quantile function.
double inverse_cdf_kumaraswamy(double a, double b, double nu);
double cdf_kumaraswamy(double a, double b, double x);

enum class PriorKind { kBeta, kGamma, kDiagonalGaussian };

std::string to_string(PriorKind kind);
PriorKind prior_kind_from_string(const std::string& name);

/// Product of independent per-component densities.
///   Beta(first=alpha, second=beta), Gamma(first=shape, second=rate),
///   Gaussian(first=mean, second=std).
struct Prior {
  PriorKind kind = PriorKind::kDiagonalGaussian;
  std::vector<double> first;
  std::vector<double> second;

  static Prior beta(double alpha, double beta);
  static Prior gamma(double shape, double rate);
  static Prior diagonal_gaussian(std::vector<double> mean, std::vector<double> stddev);

  std::size_t dim() const { return first.size(); }
  Support support() const;
  std::vector<double> mean() const;
  std::vector<double> variance() const;
  void validate() const;
};

Var prior_log_pdf(const Prior& prior, std::span<const Var> theta);
double prior_log_pdf(const Prior& prior, std::span<const double> theta);

/// Default number of base draws for Monte-Carlo KL estimates.
inline constexpr std::size_t kDefaultKlSamples = 100;

struct KlSpec {
  std::size_t samples = kDefaultKlSamples;
  /// Draw keys: (kKlDivergence, iteration, k).
  const RngStream* rng = nullptr;
  std::uint64_t iteration = 0;
};

/// True when Gaussian || Gaussian, where the closed form is used.
bool kl_is_analytic(const VariationalFamily& q, const Prior& p);

/// KL(q_phi || p). Closed form for Gaussian || Gaussian, otherwise the
/// reparameterized Monte-Carlo estimate mean_k [log q(g(phi,nu_k)) - log p(g(phi,nu_k))].
Var kl_divergence(const VariationalFamily& q, std::span<const Var> phi, const Prior& p, const KlSpec& spec);

/// Reparameterized Monte-Carlo KL against an arbitrary log-density.
Var monte_carlo_kl(const VariationalFamily& q, std::span<const Var> phi,
                   const std::function<Var(std::span<const Var>)>& log_target,
                   std::span<const std::vector<double>> base_draws);

/// Throws when q's support is not contained in p's or dimensions differ.
void check_compatible(const VariationalFamily& q, const Prior& p);

}  // namespace avabc
