#include "avabc/engine.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace avabc {

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kConverged: return "converged";
    case Termination::kMaxIters: return "max_iters";
    case Termination::kAborted: return "aborted";
  }
  return "?";
}

void RunConfig::validate() const {
  problem.validate(init);
  optimizer.validate();
  if (convergence.window < 2) throw Error("convergence window W must be >= 2");
  if (!(convergence.threshold > 0.0)) throw Error("convergence threshold rho must be > 0");
  if (!(convergence.smoothing >= 0.0 && convergence.smoothing < 1.0)) throw Error("smoothing factor must lie in [0, 1)");
  if (latent_samples < 1) throw Error("latent_samples K must be >= 1");
  if (latent_samples > 1 && estimator != EstimatorKind::kPathwise) {
    throw Error("latent_samples > 1 requires the pathwise estimator");
  }
  if (max_consecutive_failures < 1) throw Error("max_consecutive_failures must be >= 1");
  if (random_init && !(random_init->low < random_init->high)) throw Error("random_init: low must be < high");
}

std::vector<double> RunTrace::smoothed() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.smoothed);
  return out;
}

bool converged(std::span<const double> window, double rho) {
  const std::size_t half = window.size() / 2;
  if (half == 0) return false;
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    first += window[i];
    last += window[window.size() - half + i];
  }
  first /= static_cast<double>(half);
  last /= static_cast<double>(half);
  return std::abs(last - first) < rho * (1.0 + std::abs(first));
}

VariationalFamily initial_family(const RunConfig& config) {
  if (!config.random_init) return config.init;
  const RngStream rng(config.seed);
  Engine eng = rng.substream(DrawKind::kInit, 0, 0);
  std::uniform_real_distribution<double> dist(config.random_init->low, config.random_init->high);
  std::vector<double> params = config.init.constrained();
  for (double& p : params) p = dist(eng);
  return VariationalFamily::from_constrained(config.init.kind(), params);
}

namespace {

struct Evaluation {
  GradientEstimate estimate;
  bool ok = false;
  std::string error;
};

double norm2(std::span<const double> g) {
  double s = 0.0;
  for (double x : g) s += x * x;
  return std::sqrt(s);
}

}  // namespace

RunTrace run(const RunConfig& config) {
  config.validate();
  const RngStream rng(config.seed);
  const VariationalFamily start = initial_family(config);
  VariationalFamily family = start;
  OptimizerState optimizer(config.optimizer, family.num_params());
  ControlVariateState cv;
  cv.capacity = config.cv_window;

  std::optional<LatentProblem> latent;
  if (config.latent_samples > 1) {
    const BoundProblem& p = config.problem;
    latent = LatentProblem{std::make_shared<NoLatent>(p.simulator), p.observation, p.prior, std::nullopt, p.epsilon,
                           p.samples, config.latent_samples, p.simulations, p.kl_samples, true};
  }

  RunTrace trace;
  trace.family = family.kind();
  trace.initial_phi = family.phi();
  const auto t0 = std::chrono::steady_clock::now();

  auto evaluate = [&](std::uint64_t iter) {
    Evaluation ev;
    try {
      if (config.estimator == EstimatorKind::kPathwise && latent) {
        ev.estimate = latent_pathwise_bound(family, std::nullopt, *latent, rng, iter);
      } else if (config.estimator == EstimatorKind::kPathwise) {
        ev.estimate = pathwise_bound(family, config.problem, rng, iter);
      } else {
        ScoreFunctionEstimate sf = score_function_bound(family, config.problem, cv, rng, iter);
        ev.estimate = std::move(sf.estimate);
        ev.estimate.per_sample_grads.clear();
        if (!ev.estimate.failed && cv.capacity > 0) cv = update_control_variate(std::move(cv), sf.pairs);
      }
      ev.ok = !ev.estimate.failed;
      for (double g : ev.estimate.grad) ev.ok = ev.ok && std::isfinite(g);
      if (!ev.ok && ev.error.empty()) ev.error = "simulation batch failed or gradient not finite";
    } catch (const std::exception& e) {
      ev.ok = false;
      ev.error = e.what();
    }
    return ev;
  };

  const double smoothing = config.convergence.smoothing;
  bool have_smoothed = false;
  double smoothed = 0.0;
  std::size_t consecutive_failures = 0;
  Evaluation last;

  auto record = [&](std::size_t iter, const Evaluation& ev) {
    IterationRecord r;
    r.iter = iter;
    r.phi = family.phi();
    r.failed = !ev.ok;
    if (ev.ok) {
      r.bound = ev.estimate.bound_value;
      smoothed = have_smoothed ? smoothing * smoothed + (1.0 - smoothing) * r.bound : r.bound;
      have_smoothed = true;
      r.grad = ev.estimate.grad;
      r.grad_norm = norm2(r.grad);
    } else {
      r.bound = kFailurePenalty;
      r.grad.assign(family.num_params(), 0.0);
    }
    r.smoothed = have_smoothed ? smoothed : kFailurePenalty;
    r.sim_failures = ev.estimate.sim_failures;
    r.mean_statistics = ev.estimate.mean_statistics;
    r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    trace.records.push_back(std::move(r));
  };

  last = evaluate(0);
  record(0, last);
  consecutive_failures = last.ok ? 0 : 1;
  trace.termination = Termination::kMaxIters;

  const std::size_t W = config.convergence.window;
  for (std::size_t iter = 1; iter <= config.max_iters; ++iter) {
    if (last.ok) {
      family = family.with_phi(optimizer.step(family.phi(), last.estimate.grad, true));
    } else if (config.reinitialize_on_failure) {
      family = start;
      optimizer = OptimizerState(config.optimizer, family.num_params());
      cv = ControlVariateState{};
      cv.capacity = config.cv_window;
    }
    last = evaluate(iter);
    record(iter, last);

    if (last.ok) {
      consecutive_failures = 0;
    } else if (++consecutive_failures > config.max_consecutive_failures) {
      trace.termination = Termination::kAborted;
      std::ostringstream os;
      os << "aborted after " << consecutive_failures << " consecutive failed evaluations at iteration " << iter
         << ": " << last.error;
      trace.diagnostic = os.str();
      break;
    }

    if (!trace.convergence_iteration && trace.records.size() >= W) {
      std::vector<double> window;
      window.reserve(W);
      for (std::size_t i = trace.records.size() - W; i < trace.records.size(); ++i) {
        window.push_back(trace.records[i].smoothed);
      }
      if (converged(window, config.convergence.threshold)) {
        trace.convergence_iteration = iter;
        if (config.stop_on_convergence) {
          trace.termination = Termination::kConverged;
          break;
        }
      }
    }
  }
  if (trace.termination == Termination::kMaxIters && trace.convergence_iteration) {
    trace.termination = Termination::kConverged;
  }
  if (trace.termination == Termination::kAborted && trace.records.size() == 1 && !last.ok) {
    trace.diagnostic = last.error;
  }
  trace.final_phi = family.phi();
  return trace;
}

// ---------------------------------------------------------------------------

namespace {

bool same_prior(const Prior& a, const Prior& b) {
  return a.kind == b.kind && a.first == b.first && a.second == b.second;
}

}  // namespace

void check_comparable(const RunConfig& a, const RunConfig& b) {
  std::vector<std::string> diffs;
  const auto& pa = a.problem;
  const auto& pb = b.problem;
  if (pa.simulator->name() != pb.simulator->name()) diffs.push_back("simulator");
  if (pa.observation.statistics != pb.observation.statistics) diffs.push_back("observation");
  if (!same_prior(pa.prior, pb.prior)) diffs.push_back("prior");
  if (pa.epsilon.kind != pb.epsilon.kind || pa.epsilon.value != pb.epsilon.value) diffs.push_back("epsilon");
  if (pa.samples != pb.samples) diffs.push_back("samples");
  if (pa.simulations != pb.simulations) diffs.push_back("simulations");
  if (pa.kl_samples != pb.kl_samples) diffs.push_back("kl_samples");
  if (a.init.kind() != b.init.kind() || a.init.phi() != b.init.phi()) diffs.push_back("init");
  if (a.random_init.has_value() != b.random_init.has_value() ||
      (a.random_init && (a.random_init->low != b.random_init->low || a.random_init->high != b.random_init->high))) {
    diffs.push_back("random_init");
  }
  const auto& oa = a.optimizer;
  const auto& ob = b.optimizer;
  if (oa.kind != ob.kind || oa.learning_rate != ob.learning_rate || oa.beta1 != ob.beta1 || oa.beta2 != ob.beta2 ||
      oa.stabilizer != ob.stabilizer) {
    diffs.push_back("optimizer");
  }
  if (a.latent_samples != b.latent_samples) diffs.push_back("latent_samples");
  if (a.max_iters != b.max_iters) diffs.push_back("max_iters");
  if (a.convergence.window != b.convergence.window || a.convergence.threshold != b.convergence.threshold ||
      a.convergence.smoothing != b.convergence.smoothing || a.stop_on_convergence != b.stop_on_convergence) {
    diffs.push_back("convergence");
  }
  if (a.seed != b.seed) diffs.push_back("seed");
  if (!diffs.empty()) {
    std::string msg = "configs are not comparable; they differ in:";
    for (const auto& d : diffs) msg += " " + d;
    throw Error(msg);
  }
}

bool traces_identical(const RunTrace& x, const RunTrace& y) {
  if (x.records.size() != y.records.size() || x.final_phi != y.final_phi) return false;
  for (std::size_t i = 0; i < x.records.size(); ++i) {
    const auto& a = x.records[i];
    const auto& b = y.records[i];
    if (a.bound != b.bound || a.smoothed != b.smoothed || a.phi != b.phi || a.grad != b.grad || a.failed != b.failed) {
      return false;
    }
  }
  return true;
}

CompareReport compare_runs(const RunConfig& a, const RunConfig& b, std::span<const std::size_t> profile_sizes,
                           std::size_t n_repeats) {
  check_comparable(a, b);
  CompareReport report;
  report.a = run(a);
  report.b = run(b);
  report.identical_traces = traces_identical(report.a, report.b);

  auto conv_iter = [](const RunTrace& t) {
    return static_cast<double>(t.convergence_iteration.value_or(t.records.back().iter));
  };
  const double ia = conv_iter(report.a);
  const double ib = conv_iter(report.b);
  report.convergence_ratio = ia > 0.0 ? ib / ia : 0.0;

  const RngStream rng(a.seed);
  const std::pair<const char*, const RunTrace*> sides[] = {{"a", &report.a}, {"b", &report.b}};
  for (const auto& [label, trace] : sides) {
    const VariationalFamily at = trace->final_family();
    for (std::size_t s : profile_sizes) {
      BoundProblem problem = a.problem;
      problem.samples = s;
      problem.simulations = s;
      for (EstimatorKind kind : {EstimatorKind::kPathwise, EstimatorKind::kScoreFunction}) {
        ProfileEntry entry{kind, label, s, {}};
        try {
          entry.profile = gradient_variance_profile(kind, at, problem, rng, n_repeats);
        } catch (const Error&) {
          continue;
        }
        report.profiles.push_back(std::move(entry));
      }
    }
  }
  return report;
}

}  // namespace avabc
