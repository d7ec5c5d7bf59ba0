#include "avabc/estimators.hpp"

#include <cmath>
#include <sstream>

namespace avabc {

namespace {

std::vector<std::vector<double>> noise_batch(std::span<const NoiseBlock> spec, const RngStream& rng,
                                             std::uint64_t iteration, std::uint64_t first, std::size_t count) {
  std::vector<std::vector<double>> u;
  u.reserve(count);
  for (std::size_t l = 0; l < count; ++l) {
    Engine eng = rng.substream(DrawKind::kSimulatorNoise, iteration, first + l);
    u.push_back(draw_noise(spec, eng));
  }
  return u;
}

std::vector<double> base_draw(const VariationalFamily& q, const RngStream& rng, DrawKind kind,
                              std::uint64_t iteration, std::uint64_t index) {
  Engine eng = rng.substream(kind, iteration, index);
  return q.draw_base(eng);
}

void require_finite(const Var& v, const char* what, std::size_t s) {
  if (!std::isfinite(v.value())) {
    std::ostringstream os;
    os << what << " is not finite (" << v.value() << ") at sample s=" << s;
    throw Error(os.str());
  }
}

struct StatsAccumulator {
  std::vector<double> sum;
  std::size_t count = 0;

  void add(const AbcLogLik& ll) {
    if (ll.failed) return;
    if (sum.empty()) sum.assign(ll.mean_statistics.size(), 0.0);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += ll.mean_statistics[i];
    ++count;
  }
  std::vector<double> mean() const {
    std::vector<double> m = sum;
    for (double& x : m) x /= static_cast<double>(count == 0 ? 1 : count);
    return m;
  }
};

// log (1/L) sum_l K(y, f(g(phi, nu_s), u_sl)) for one s.
AbcLogLik pathwise_term(const VariationalFamily& q, std::span<const Var> phi, const BoundProblem& problem,
                        const RngStream& rng, std::uint64_t iteration, std::size_t s) {
  const auto nu = base_draw(q, rng, DrawKind::kVariational, iteration, s);
  const auto theta = q.sample(phi, nu);
  const auto spec = problem.simulator->noise_spec();
  const auto u = noise_batch(spec, rng, iteration, s * problem.simulations, problem.simulations);
  AbcLogLik ll = abc_loglik(*problem.simulator, theta, problem.observation, u, problem.epsilon);
  require_finite(ll.value, "ABC log-likelihood", s);
  return ll;
}

Var kl_term(const VariationalFamily& q, std::span<const Var> phi, const Prior& prior, std::size_t kl_samples,
            const RngStream& rng, std::uint64_t iteration) {
  KlSpec spec;
  spec.samples = kl_samples;
  spec.rng = &rng;
  spec.iteration = iteration;
  return kl_divergence(q, phi, prior, spec);
}

}  // namespace

std::string to_string(EstimatorKind kind) {
  return kind == EstimatorKind::kPathwise ? "pathwise" : "score_function";
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "pathwise") return EstimatorKind::kPathwise;
  if (name == "score_function") return EstimatorKind::kScoreFunction;
  throw Error("unknown estimator '" + name + "' (expected pathwise or score_function)");
}

void BoundProblem::validate(const VariationalFamily& q) const {
  if (!simulator) throw Error("bound problem has no simulator");
  if (samples < 1 || simulations < 1) throw Error("S and L must be >= 1");
  if (q.dim() != simulator->theta_dim()) {
    throw Error("variational family dimension " + std::to_string(q.dim()) + " does not match simulator '" +
                simulator->name() + "' (" + std::to_string(simulator->theta_dim()) + ")");
  }
  check_compatible(q, prior);
  observation.validate(simulator->statistics_dim());
  epsilon.validate(simulator->statistics_dim());
  if (!kl_is_analytic(q, prior) && kl_samples < 1) throw Error("Monte-Carlo KL needs kl_samples >= 1");
}

// ---------------------------------------------------------------------------
// Pathwise

BoundExpression build_pathwise_bound([[maybe_unused]] Tape& tape, const VariationalFamily& q, std::span<const Var> phi,
                                     const BoundProblem& problem, const RngStream& rng, std::uint64_t iteration) {
  problem.validate(q);
  BoundExpression out;
  StatsAccumulator stats;
  out.sample_terms.reserve(problem.samples);
  for (std::size_t s = 0; s < problem.samples; ++s) {
    AbcLogLik ll = pathwise_term(q, phi, problem, rng, iteration, s);
    out.sim_failures += ll.failures;
    out.failed = out.failed || ll.failed;
    stats.add(ll);
    out.sample_terms.push_back(ll.value);
  }
  out.kl = kl_term(q, phi, problem.prior, problem.kl_samples, rng, iteration);
  out.bound = mean(out.sample_terms) - out.kl;
  require_finite(out.bound, "lower bound", problem.samples);
  out.mean_statistics = stats.mean();
  return out;
}

GradientEstimate pathwise_bound(const VariationalFamily& q, const BoundProblem& problem, const RngStream& rng,
                                std::uint64_t iteration, bool per_sample) {
  GradientEstimate est;
  est.kind = EstimatorKind::kPathwise;
  est.S = problem.samples;
  est.L = problem.simulations;

  Tape tape;
  const auto phi = q.lift(tape);
  if (!per_sample) {
    BoundExpression expr = build_pathwise_bound(tape, q, phi, problem, rng, iteration);
    est.grad = tape.backward(expr.bound).wrt(phi);
    est.bound_value = expr.bound.value();
    est.sim_failures = expr.sim_failures;
    est.failed = expr.failed;
    est.mean_statistics = std::move(expr.mean_statistics);
    return est;
  }

  // One sub-graph per sample on top of the shared parameter inputs.
  problem.validate(q);
  const std::size_t mark = tape.mark();
  const std::size_t dim = q.num_params();
  StatsAccumulator stats;
  double term_sum = 0.0;
  for (std::size_t s = 0; s < problem.samples; ++s) {
    AbcLogLik ll = pathwise_term(q, phi, problem, rng, iteration, s);
    est.sim_failures += ll.failures;
    est.failed = est.failed || ll.failed;
    stats.add(ll);
    term_sum += ll.value.value();
    est.per_sample_grads.push_back(tape.backward(ll.value).wrt(phi));
    tape.rewind(mark);
  }
  const Var kl = kl_term(q, phi, problem.prior, problem.kl_samples, rng, iteration);
  const auto kl_grad = tape.backward(kl).wrt(phi);
  est.grad.assign(dim, 0.0);
  for (auto& row : est.per_sample_grads) {
    for (std::size_t d = 0; d < dim; ++d) {
      row[d] -= kl_grad[d];
      est.grad[d] += row[d];
    }
  }
  for (double& g : est.grad) g /= static_cast<double>(problem.samples);
  est.bound_value = term_sum / static_cast<double>(problem.samples) - kl.value();
  est.mean_statistics = stats.mean();
  return est;
}

// ---------------------------------------------------------------------------
// Control variates

ControlVariateState update_control_variate(ControlVariateState cv, std::span<const CvPair> pairs) {
  for (const auto& p : pairs) {
    if (p.f.size() != p.h.size()) throw Error("control variate pair has mismatched dimensions");
    cv.window.push_back(p);
  }
  while (cv.window.size() > cv.capacity) cv.window.pop_front();
  if (cv.window.empty()) {
    cv.a_hat.clear();
    return cv;
  }
  const std::size_t dim = cv.window.front().h.size();
  cv.a_hat.assign(dim, 0.0);
  const std::size_t n = cv.window.size();
  if (n < 2) return cv;
  for (std::size_t d = 0; d < dim; ++d) {
    double mf = 0.0, mh = 0.0;
    for (const auto& p : cv.window) {
      mf += p.f[d];
      mh += p.h[d];
    }
    mf /= static_cast<double>(n);
    mh /= static_cast<double>(n);
    double cov = 0.0, var = 0.0;
    for (const auto& p : cv.window) {
      cov += (p.f[d] - mf) * (p.h[d] - mh);
      var += (p.h[d] - mh) * (p.h[d] - mh);
    }
    cv.a_hat[d] = var > 0.0 && std::isfinite(cov / var) ? cov / var : 0.0;
  }
  return cv;
}

// ---------------------------------------------------------------------------
// Score function

ScoreFunctionEstimate score_function_bound(const VariationalFamily& q, const BoundProblem& problem,
                                           const ControlVariateState& cv, const RngStream& rng,
                                           std::uint64_t iteration) {
  problem.validate(q);
  ScoreFunctionEstimate out;
  GradientEstimate& est = out.estimate;
  est.kind = EstimatorKind::kScoreFunction;
  est.S = problem.samples;
  est.L = problem.simulations;
  const std::size_t dim = q.num_params();
  est.grad.assign(dim, 0.0);

  Tape tape;
  const auto phi = q.lift(tape);
  const std::size_t mark = tape.mark();
  const auto spec = problem.simulator->noise_spec();
  StatsAccumulator stats;
  double f_sum = 0.0;
  for (std::size_t s = 0; s < problem.samples; ++s) {
    tape.rewind(mark);
    const auto nu = base_draw(q, rng, DrawKind::kVariational, iteration, s);
    const auto theta_values = q.sample(nu);
    std::vector<Var> theta;
    for (double t : theta_values) theta.push_back(tape.constant(t));

    const auto u = noise_batch(spec, rng, iteration, s * problem.simulations, problem.simulations);
    AbcLogLik ll = abc_loglik(*problem.simulator, theta, problem.observation, u, problem.epsilon);
    require_finite(ll.value, "ABC log-likelihood", s);
    est.sim_failures += ll.failures;
    est.failed = est.failed || ll.failed;
    stats.add(ll);

    const double log_joint = ll.value.value() + prior_log_pdf(problem.prior, theta_values);
    const Var log_q = q.log_pdf(phi, theta);
    const double f = log_joint - log_q.value();
    if (!std::isfinite(f)) {
      std::ostringstream os;
      os << "score-function integrand is not finite at sample s=" << s;
      throw Error(os.str());
    }
    f_sum += f;

    CvPair pair;
    pair.h = tape.backward(log_q).wrt(phi);
    pair.f.resize(dim);
    std::vector<double> row(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      pair.f[d] = pair.h[d] * f;
      row[d] = pair.h[d] * (f - cv.scale(d));
      est.grad[d] += row[d];
    }
    est.per_sample_grads.push_back(std::move(row));
    out.pairs.push_back(std::move(pair));
  }
  for (double& g : est.grad) g /= static_cast<double>(problem.samples);
  est.bound_value = f_sum / static_cast<double>(problem.samples);
  est.mean_statistics = stats.mean();
  return out;
}

GradientEstimate estimate_gradient(EstimatorKind kind, const VariationalFamily& q, const BoundProblem& problem,
                                   const RngStream& rng, std::uint64_t iteration, bool per_sample,
                                   const ControlVariateState* cv) {
  if (kind == EstimatorKind::kPathwise) return pathwise_bound(q, problem, rng, iteration, per_sample);
  ControlVariateState none;
  none.capacity = 0;
  GradientEstimate est = score_function_bound(q, problem, cv ? *cv : none, rng, iteration).estimate;
  if (!per_sample) est.per_sample_grads.clear();
  return est;
}

// ---------------------------------------------------------------------------
// Latent variables

BoundExpression build_latent_bound([[maybe_unused]] Tape& tape, const VariationalFamily& q_theta, std::span<const Var> phi,
                                   const std::optional<VariationalFamily>& q_z, std::span<const Var> xi,
                                   const LatentProblem& problem, const RngStream& rng, std::uint64_t iteration) {
  const LatentSimulator& sim = *problem.simulator;
  const std::size_t S = problem.samples, K = problem.latent_samples, L = problem.simulations;
  if (S < 1 || K < 1 || L < 1) throw Error("S, K and L must be >= 1");
  if (q_theta.dim() != sim.theta_dim()) throw Error("latent bound: theta family dimension mismatch");
  check_compatible(q_theta, problem.theta_prior);
  const bool has_latent = sim.latent_dim() > 0;
  if (has_latent) {
    if (!q_z || q_z->dim() != sim.latent_dim()) throw Error("latent bound: latent family dimension mismatch");
    if (!problem.latent_prior) throw Error("latent bound: latent prior missing");
    check_compatible(*q_z, *problem.latent_prior);
  }
  problem.observation.validate(sim.statistics_dim());
  problem.epsilon.validate(sim.statistics_dim());

  const auto spec = sim.noise_spec();
  BoundExpression out;
  StatsAccumulator stats;
  out.sample_terms.reserve(S * K);
  for (std::size_t s = 0; s < S; ++s) {
    const auto nu = base_draw(q_theta, rng, DrawKind::kVariational, iteration, s);
    const auto theta = q_theta.sample(phi, nu);
    for (std::size_t k = 0; k < K; ++k) {
      std::vector<Var> z;
      if (has_latent) {
        const std::uint64_t w_index = problem.shared_latent_draws ? k : s * K + k;
        const auto w = base_draw(*q_z, rng, DrawKind::kLatent, iteration, w_index);
        z = q_z->sample(xi, w);
      }
      const std::size_t sk = s * K + k;
      const auto u = noise_batch(spec, rng, iteration, sk * L, L);
      AbcLogLik ll = abc_loglik([&](std::span<const double> uu) { return sim.simulate(theta, z, uu); },
                                sim.statistics_dim(), theta, problem.observation, u, problem.epsilon);
      require_finite(ll.value, "ABC log-likelihood", s);
      out.sim_failures += ll.failures;
      out.failed = out.failed || ll.failed;
      stats.add(ll);
      out.sample_terms.push_back(ll.value);
    }
  }
  out.kl = kl_term(q_theta, phi, problem.theta_prior, problem.kl_samples, rng, iteration);
  out.bound = mean(out.sample_terms) - out.kl;
  if (has_latent) {
    const RngStream latent_rng = rng.fork(static_cast<std::uint64_t>(DrawKind::kLatent));
    out.bound = out.bound - kl_term(*q_z, xi, *problem.latent_prior, problem.kl_samples, latent_rng, iteration);
  }
  require_finite(out.bound, "lower bound", S);
  out.mean_statistics = stats.mean();
  return out;
}

GradientEstimate latent_pathwise_bound(const VariationalFamily& q_theta, const std::optional<VariationalFamily>& q_z,
                                       const LatentProblem& problem, const RngStream& rng, std::uint64_t iteration) {
  Tape tape;
  const auto phi = q_theta.lift(tape);
  std::vector<Var> xi;
  if (q_z && problem.simulator->latent_dim() > 0) xi = q_z->lift(tape);
  BoundExpression expr = build_latent_bound(tape, q_theta, phi, q_z, xi, problem, rng, iteration);
  const Gradient g = tape.backward(expr.bound);

  GradientEstimate est;
  est.kind = EstimatorKind::kPathwise;
  est.S = problem.samples;
  est.L = problem.simulations;
  est.grad = g.wrt(phi);
  const auto gz = g.wrt(xi);
  est.grad.insert(est.grad.end(), gz.begin(), gz.end());
  est.bound_value = expr.bound.value();
  est.sim_failures = expr.sim_failures;
  est.failed = expr.failed;
  est.mean_statistics = std::move(expr.mean_statistics);
  return est;
}

// ---------------------------------------------------------------------------

VarianceProfile gradient_variance_profile(EstimatorKind kind, const VariationalFamily& q, const BoundProblem& problem,
                                          const RngStream& rng, std::size_t n_repeats,
                                          const ControlVariateState* cv) {
  if (n_repeats < 2) throw Error("gradient_variance_profile: n_repeats must be >= 2");
  const RngStream profile_rng = rng.fork(kProfileStreamTag);
  VarianceProfile out;
  out.samples.reserve(n_repeats);
  for (std::size_t r = 0; r < n_repeats; ++r) {
    out.samples.push_back(estimate_gradient(kind, q, problem, profile_rng, r, false, cv).grad);
  }
  const std::size_t dim = q.num_params();
  out.mean.assign(dim, 0.0);
  out.variance.assign(dim, 0.0);
  for (const auto& g : out.samples) {
    for (std::size_t d = 0; d < dim; ++d) out.mean[d] += g[d];
  }
  for (double& m : out.mean) m /= static_cast<double>(n_repeats);
  for (const auto& g : out.samples) {
    for (std::size_t d = 0; d < dim; ++d) out.variance[d] += (g[d] - out.mean[d]) * (g[d] - out.mean[d]);
  }
  for (double& v : out.variance) v /= static_cast<double>(n_repeats - 1);
  return out;
}

}  // namespace avabc
