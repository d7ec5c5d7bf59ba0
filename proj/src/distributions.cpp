#include "avabc/distributions.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "avabc/error.hpp"

namespace avabc {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)

bool in_support(Support s, double x) {
  switch (s) {
    case Support::kUnitInterval: return x > 0.0 && x < 1.0;
    case Support::kPositive: return x > 0.0 && std::isfinite(x);
    case Support::kReal: return std::isfinite(x);
  }
  return false;
}

const char* support_name(Support s) {
  switch (s) {
    case Support::kUnitInterval: return "(0,1)";
    case Support::kPositive: return "(0,inf)";
    case Support::kReal: return "(-inf,inf)";
  }
  return "?";
}

void require_support(Support s, double x, const char* who) {
  if (!in_support(s, x)) {
    std::ostringstream os;
    os.precision(17);
    os << who << ": value " << x << " outside support " << support_name(s);
    throw Error(os.str());
  }
}

bool contains(Support outer, Support inner) {
  if (outer == Support::kReal) return true;
  if (outer == Support::kPositive) return inner != Support::kReal;
  return inner == Support::kUnitInterval;
}

Var total(std::span<const Var> terms) { return terms.size() == 1 ? terms.front() : sum(terms); }

}  // namespace

std::string to_string(FamilyKind kind) {
  switch (kind) {
    case FamilyKind::kKumaraswamy: return "kumaraswamy";
    case FamilyKind::kLogNormal: return "log_normal";
    case FamilyKind::kDiagonalGaussian: return "diagonal_gaussian";
  }
  return "?";
}

FamilyKind family_kind_from_string(const std::string& name) {
  if (name == "kumaraswamy") return FamilyKind::kKumaraswamy;
  if (name == "log_normal") return FamilyKind::kLogNormal;
  if (name == "diagonal_gaussian") return FamilyKind::kDiagonalGaussian;
  throw Error("unknown variational family '" + name + "'");
}

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::kBeta: return "beta";
    case PriorKind::kGamma: return "gamma";
    case PriorKind::kDiagonalGaussian: return "diagonal_gaussian";
  }
  return "?";
}

PriorKind prior_kind_from_string(const std::string& name) {
  if (name == "beta") return PriorKind::kBeta;
  if (name == "gamma") return PriorKind::kGamma;
  if (name == "diagonal_gaussian") return PriorKind::kDiagonalGaussian;
  throw Error("unknown prior '" + name + "'");
}

// ---------------------------------------------------------------------------
// Kumaraswamy helpers

double inverse_cdf_kumaraswamy(double a, double b, double nu) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("kumaraswamy: a and b must be > 0");
  if (!(nu > 0.0 && nu < 1.0)) {
    std::ostringstream os;
    os << "kumaraswamy inverse cdf: nu=" << nu << " outside the open unit interval";
    throw Error(os.str());
  }
  return std::pow(-std::expm1(std::log1p(-nu) / b), 1.0 / a);
}

double cdf_kumaraswamy(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // 1 - (1 - x^a)^b
  return -std::expm1(b * std::log1p(-std::pow(x, a)));
}

// ---------------------------------------------------------------------------
// VariationalFamily

VariationalFamily::VariationalFamily(FamilyKind kind, std::size_t dim, std::vector<double> phi)
    : kind_(kind), dim_(dim), phi_(std::move(phi)) {
  for (double p : phi_) {
    if (!std::isfinite(p)) throw Error("variational parameters must be finite");
  }
}

VariationalFamily VariationalFamily::kumaraswamy(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error("kumaraswamy: a and b must be > 0");
  return VariationalFamily(FamilyKind::kKumaraswamy, 1, {std::log(a), std::log(b)});
}

VariationalFamily VariationalFamily::log_normal(double mu, double sigma) {
  if (!(sigma > 0.0)) throw Error("log_normal: sigma must be > 0");
  return VariationalFamily(FamilyKind::kLogNormal, 1, {mu, std::log(sigma)});
}

VariationalFamily VariationalFamily::diagonal_gaussian(std::vector<double> mu, std::vector<double> sigma) {
  if (mu.empty() || mu.size() != sigma.size()) throw Error("diagonal_gaussian: mean/std dimension mismatch");
  std::vector<double> phi = std::move(mu);
  for (double s : sigma) {
    if (!(s > 0.0)) throw Error("diagonal_gaussian: std must be > 0");
    phi.push_back(std::log(s));
  }
  const std::size_t dim = phi.size() / 2;
  return VariationalFamily(FamilyKind::kDiagonalGaussian, dim, std::move(phi));
}

VariationalFamily VariationalFamily::from_phi(FamilyKind kind, std::vector<double> phi) {
  switch (kind) {
    case FamilyKind::kKumaraswamy:
    case FamilyKind::kLogNormal:
      if (phi.size() != 2) throw Error(to_string(kind) + ": expected 2 parameters");
      return VariationalFamily(kind, 1, std::move(phi));
    case FamilyKind::kDiagonalGaussian:
      if (phi.empty() || phi.size() % 2 != 0) throw Error("diagonal_gaussian: expected an even, non-zero parameter count");
    {
      const std::size_t dim = phi.size() / 2;
      return VariationalFamily(kind, dim, std::move(phi));
    }
  }
  throw Error("unknown family");
}

VariationalFamily VariationalFamily::from_constrained(FamilyKind kind, std::span<const double> params) {
  switch (kind) {
    case FamilyKind::kKumaraswamy:
      if (params.size() != 2) throw Error("kumaraswamy: expected (a, b)");
      return kumaraswamy(params[0], params[1]);
    case FamilyKind::kLogNormal:
      if (params.size() != 2) throw Error("log_normal: expected (mu, sigma)");
      return log_normal(params[0], params[1]);
    case FamilyKind::kDiagonalGaussian: {
      if (params.empty() || params.size() % 2 != 0) throw Error("diagonal_gaussian: expected (mu..., sigma...)");
      const std::size_t d = params.size() / 2;
      return diagonal_gaussian({params.begin(), params.begin() + static_cast<std::ptrdiff_t>(d)},
                               {params.begin() + static_cast<std::ptrdiff_t>(d), params.end()});
    }
  }
  throw Error("unknown family");
}

BaseKind VariationalFamily::base() const {
  return kind_ == FamilyKind::kKumaraswamy ? BaseKind::kUniform : BaseKind::kStandardNormal;
}

Support VariationalFamily::support() const {
  switch (kind_) {
    case FamilyKind::kKumaraswamy: return Support::kUnitInterval;
    case FamilyKind::kLogNormal: return Support::kPositive;
    case FamilyKind::kDiagonalGaussian: return Support::kReal;
  }
  return Support::kReal;
}

VariationalFamily VariationalFamily::with_phi(std::vector<double> phi) const {
  if (phi.size() != phi_.size()) throw Error("with_phi: parameter count mismatch");
  return VariationalFamily(kind_, dim_, std::move(phi));
}

std::vector<std::string> VariationalFamily::param_names() const {
  switch (kind_) {
    case FamilyKind::kKumaraswamy: return {"log_a", "log_b"};
    case FamilyKind::kLogNormal: return {"mu", "log_sigma"};
    case FamilyKind::kDiagonalGaussian: {
      std::vector<std::string> names;
      for (std::size_t i = 0; i < dim_; ++i) names.push_back("mu_" + std::to_string(i));
      for (std::size_t i = 0; i < dim_; ++i) names.push_back("log_sigma_" + std::to_string(i));
      return names;
    }
  }
  return {};
}

std::vector<double> VariationalFamily::constrained() const {
  switch (kind_) {
    case FamilyKind::kKumaraswamy: return {std::exp(phi_[0]), std::exp(phi_[1])};
    case FamilyKind::kLogNormal: return {phi_[0], std::exp(phi_[1])};
    case FamilyKind::kDiagonalGaussian: {
      std::vector<double> out(phi_.begin(), phi_.begin() + static_cast<std::ptrdiff_t>(dim_));
      for (std::size_t i = 0; i < dim_; ++i) out.push_back(std::exp(phi_[dim_ + i]));
      return out;
    }
  }
  return {};
}

std::vector<Var> VariationalFamily::lift(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(phi_.size());
  for (double p : phi_) out.push_back(tape.lift(p));
  return out;
}

std::vector<Var> VariationalFamily::freeze(Tape& tape) const {
  std::vector<Var> out;
  out.reserve(phi_.size());
  for (double p : phi_) out.push_back(tape.constant(p));
  return out;
}

std::vector<double> VariationalFamily::draw_base(Engine& eng) const {
  return base() == BaseKind::kUniform ? open_uniforms(eng, dim_) : standard_normals(eng, dim_);
}

void VariationalFamily::check_phi(std::span<const Var> phi) const {
  if (phi.size() != phi_.size()) throw Error(to_string(kind_) + ": parameter vector has wrong length");
}

std::vector<Var> VariationalFamily::sample(std::span<const Var> phi, std::span<const double> nu) const {
  check_phi(phi);
  if (nu.size() != dim_) throw Error(to_string(kind_) + ": base draw dimension mismatch");
  std::vector<Var> theta;
  theta.reserve(dim_);
  switch (kind_) {
    case FamilyKind::kKumaraswamy: {
      const double u = nu[0];
      if (!(u > 0.0 && u < 1.0)) {
        std::ostringstream os;
        os << "kumaraswamy sample: nu=" << u << " outside the open unit interval";
        throw Error(os.str());
      }
      // inner = 1 - (1 - nu)^(1/b);  theta = inner^(1/a)
      const Var b = exp(phi[1]);
      const Var inner = -expm1(std::log1p(-u) / b);
      theta.push_back(exp(log(inner) * exp(-phi[0])));
      break;
    }
    case FamilyKind::kLogNormal:
      theta.push_back(exp(phi[0] + exp(phi[1]) * nu[0]));
      break;
    case FamilyKind::kDiagonalGaussian:
      for (std::size_t i = 0; i < dim_; ++i) theta.push_back(phi[i] + exp(phi[dim_ + i]) * nu[i]);
      break;
  }
  return theta;
}

std::vector<double> VariationalFamily::sample(std::span<const double> nu) const {
  Tape tape;
  const auto phi = freeze(tape);
  return values(sample(phi, nu));
}

Var VariationalFamily::log_pdf(std::span<const Var> phi, std::span<const Var> theta) const {
  check_phi(phi);
  if (theta.size() != dim_) throw Error(to_string(kind_) + ": theta dimension mismatch");
  for (const Var& t : theta) require_support(support(), t.value(), "variational log_pdf");
  switch (kind_) {
    case FamilyKind::kKumaraswamy: {
      // log a + log b + (a-1) log x + (b-1) log(1 - x^a)
      const Var a = exp(phi[0]);
      const Var b = exp(phi[1]);
      const Var log_x = log(theta[0]);
      const Var log_one_minus_xa = log(-expm1(a * log_x));
      return phi[0] + phi[1] + (a - 1.0) * log_x + (b - 1.0) * log_one_minus_xa;
    }
    case FamilyKind::kLogNormal: {
      const Var log_x = log(theta[0]);
      const Var z = (log_x - phi[0]) * exp(-phi[1]);
      return -log_x - phi[1] - kHalfLog2Pi - 0.5 * square(z);
    }
    case FamilyKind::kDiagonalGaussian: {
      std::vector<Var> terms;
      terms.reserve(dim_);
      for (std::size_t i = 0; i < dim_; ++i) {
        const Var z = (theta[i] - phi[i]) * exp(-phi[dim_ + i]);
        terms.push_back(-phi[dim_ + i] - kHalfLog2Pi - 0.5 * square(z));
      }
      return total(terms);
    }
  }
  throw Error("unknown family");
}

double VariationalFamily::log_pdf(std::span<const double> theta) const {
  Tape tape;
  const auto phi = freeze(tape);
  std::vector<Var> th;
  for (double t : theta) th.push_back(tape.constant(t));
  return log_pdf(phi, th).value();
}

std::vector<double> VariationalFamily::mean() const {
  const auto c = constrained();
  switch (kind_) {
    case FamilyKind::kKumaraswamy: {
      const double a = c[0], b = c[1];
      // E[X] = b B(1 + 1/a, b)
      return {std::exp(std::log(b) + std::lgamma(1.0 + 1.0 / a) + std::lgamma(b) - std::lgamma(1.0 + 1.0 / a + b))};
    }
    case FamilyKind::kLogNormal: return {std::exp(c[0] + 0.5 * c[1] * c[1])};
    case FamilyKind::kDiagonalGaussian: return {c.begin(), c.begin() + static_cast<std::ptrdiff_t>(dim_)};
  }
  return {};
}

std::vector<double> VariationalFamily::variance() const {
  const auto c = constrained();
  switch (kind_) {
    case FamilyKind::kKumaraswamy: {
      const double a = c[0], b = c[1];
      auto raw_moment = [&](double n) {
        return std::exp(std::log(b) + std::lgamma(1.0 + n / a) + std::lgamma(b) - std::lgamma(1.0 + n / a + b));
      };
      const double m1 = raw_moment(1.0);
      return {raw_moment(2.0) - m1 * m1};
    }
    case FamilyKind::kLogNormal: {
      const double s2 = c[1] * c[1];
      return {std::expm1(s2) * std::exp(2.0 * c[0] + s2)};
    }
    case FamilyKind::kDiagonalGaussian: {
      std::vector<double> v;
      for (std::size_t i = 0; i < dim_; ++i) v.push_back(c[dim_ + i] * c[dim_ + i]);
      return v;
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// Priors

Prior Prior::beta(double alpha, double beta) {
  Prior p{PriorKind::kBeta, {alpha}, {beta}};
  p.validate();
  return p;
}

Prior Prior::gamma(double shape, double rate) {
  Prior p{PriorKind::kGamma, {shape}, {rate}};
  p.validate();
  return p;
}

Prior Prior::diagonal_gaussian(std::vector<double> mean, std::vector<double> stddev) {
  Prior p{PriorKind::kDiagonalGaussian, std::move(mean), std::move(stddev)};
  p.validate();
  return p;
}

void Prior::validate() const {
  if (first.empty() || first.size() != second.size()) throw Error(to_string(kind) + " prior: parameter dimension mismatch");
  for (std::size_t i = 0; i < first.size(); ++i) {
    if (!std::isfinite(first[i]) || !(second[i] > 0.0) || !std::isfinite(second[i])) {
      throw Error(to_string(kind) + " prior: invalid parameters");
    }
    if (kind != PriorKind::kDiagonalGaussian && !(first[i] > 0.0)) {
      throw Error(to_string(kind) + " prior: shape parameters must be > 0");
    }
  }
}

Support Prior::support() const {
  switch (kind) {
    case PriorKind::kBeta: return Support::kUnitInterval;
    case PriorKind::kGamma: return Support::kPositive;
    case PriorKind::kDiagonalGaussian: return Support::kReal;
  }
  return Support::kReal;
}

std::vector<double> Prior::mean() const {
  std::vector<double> m;
  for (std::size_t i = 0; i < dim(); ++i) {
    switch (kind) {
      case PriorKind::kBeta: m.push_back(first[i] / (first[i] + second[i])); break;
      case PriorKind::kGamma: m.push_back(first[i] / second[i]); break;
      case PriorKind::kDiagonalGaussian: m.push_back(first[i]); break;
    }
  }
  return m;
}

std::vector<double> Prior::variance() const {
  std::vector<double> v;
  for (std::size_t i = 0; i < dim(); ++i) {
    const double a = first[i], b = second[i];
    switch (kind) {
      case PriorKind::kBeta: v.push_back(a * b / ((a + b) * (a + b) * (a + b + 1.0))); break;
      case PriorKind::kGamma: v.push_back(a / (b * b)); break;
      case PriorKind::kDiagonalGaussian: v.push_back(b * b); break;
    }
  }
  return v;
}

Var prior_log_pdf(const Prior& prior, std::span<const Var> theta) {
  if (theta.size() != prior.dim()) throw Error("prior log_pdf: theta dimension mismatch");
  std::vector<Var> terms;
  terms.reserve(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const Var& x = theta[i];
    require_support(prior.support(), x.value(), "prior log_pdf");
    const double a = prior.first[i], b = prior.second[i];
    switch (prior.kind) {
      case PriorKind::kBeta: {
        const double log_beta_fn = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
        terms.push_back((a - 1.0) * log(x) + (b - 1.0) * log1p(-x) - log_beta_fn);
        break;
      }
      case PriorKind::kGamma:
        terms.push_back((a - 1.0) * log(x) - b * x + (a * std::log(b) - std::lgamma(a)));
        break;
      case PriorKind::kDiagonalGaussian:
        terms.push_back(-0.5 * square((x - a) / b) - (std::log(b) + kHalfLog2Pi));
        break;
    }
  }
  return total(terms);
}

double prior_log_pdf(const Prior& prior, std::span<const double> theta) {
  Tape tape;
  std::vector<Var> th;
  for (double t : theta) th.push_back(tape.constant(t));
  return prior_log_pdf(prior, th).value();
}

// ---------------------------------------------------------------------------
// KL divergence

void check_compatible(const VariationalFamily& q, const Prior& p) {
  if (q.dim() != p.dim()) {
    throw Error("variational family dimension " + std::to_string(q.dim()) + " does not match prior dimension " +
                std::to_string(p.dim()));
  }
  if (!contains(p.support(), q.support())) {
    throw Error("incompatible supports: " + to_string(q.kind()) + " on " + support_name(q.support()) + " vs " +
                to_string(p.kind) + " prior on " + support_name(p.support()));
  }
}

bool kl_is_analytic(const VariationalFamily& q, const Prior& p) {
  return q.kind() == FamilyKind::kDiagonalGaussian && p.kind == PriorKind::kDiagonalGaussian;
}

Var monte_carlo_kl(const VariationalFamily& q, std::span<const Var> phi,
                   const std::function<Var(std::span<const Var>)>& log_target,
                   std::span<const std::vector<double>> base_draws) {
  if (base_draws.empty()) throw Error("monte-carlo KL needs at least one draw");
  std::vector<Var> terms;
  terms.reserve(base_draws.size());
  for (const auto& nu : base_draws) {
    const auto theta = q.sample(phi, nu);
    terms.push_back(q.log_pdf(phi, theta) - log_target(theta));
  }
  return mean(terms);
}

Var kl_divergence(const VariationalFamily& q, std::span<const Var> phi, const Prior& p, const KlSpec& spec) {
  check_compatible(q, p);
  if (phi.size() != q.num_params()) throw Error("kl_divergence: parameter vector has wrong length");
  if (kl_is_analytic(q, p)) {
    // sum_i log(s2/s1) + (s1^2 + (m1-m2)^2) / (2 s2^2) - 1/2
    const std::size_t d = q.dim();
    std::vector<Var> terms;
    terms.reserve(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double m2 = p.first[i], s2 = p.second[i];
      const Var var1 = exp(2.0 * phi[d + i]);
      terms.push_back((std::log(s2) - 0.5) - phi[d + i] + (var1 + square(phi[i] - m2)) / (2.0 * s2 * s2));
    }
    return total(terms);
  }
  if (spec.rng == nullptr || spec.samples == 0) throw Error("kl_divergence: Monte-Carlo KL needs a random stream and samples > 0");
  std::vector<std::vector<double>> draws;
  draws.reserve(spec.samples);
  for (std::size_t k = 0; k < spec.samples; ++k) {
    Engine eng = spec.rng->substream(DrawKind::kKlDivergence, spec.iteration, k);
    draws.push_back(q.draw_base(eng));
  }
  return monte_carlo_kl(q, phi, [&p](std::span<const Var> theta) { return prior_log_pdf(p, theta); }, draws);
}

}  // namespace avabc
