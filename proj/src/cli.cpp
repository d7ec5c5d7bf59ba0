#include "avabc/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace avabc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string num(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing artifact " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_csv(const fs::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream out = open_out(path);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << num(row[i]);
    out << '\n';
  }
}

json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

std::string kind_label(EstimatorKind k) { return k == EstimatorKind::kPathwise ? "pathwise" : "score"; }

}  // namespace

fs::path default_output_root() {
  if (const char* env = std::getenv("AVABC_OUTPUT_ROOT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

void apply_overrides(ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.estimator) c.estimator = estimator_kind_from_string(*o.estimator);
  if (o.samples) c.samples = *o.samples;
  if (o.simulations) c.simulations = *o.simulations;
  if (o.latent_samples) c.latent_samples = *o.latent_samples;
  if (o.max_iters) c.max_iters = *o.max_iters;
  if (o.optimizer) {
    const OptimizerKind k = optimizer_kind_from_string(*o.optimizer);
    if (k != c.optimizer.kind) c.optimizer = k == OptimizerKind::kAdam ? OptimizerSpec::adam() : OptimizerSpec::adagrad();
  }
}

int exit_code(Termination t) {
  switch (t) {
    case Termination::kConverged: return kExitConverged;
    case Termination::kMaxIters: return kExitMaxIters;
    case Termination::kAborted: return kExitError;
  }
  return kExitError;
}

// ---------------------------------------------------------------------------

void write_trace_csv(const RunTrace& trace, const fs::path& path) {
  const auto names = VariationalFamily::from_phi(trace.family, trace.initial_phi).param_names();
  std::vector<std::string> header{"iter", "bound", "smoothed", "grad_norm", "sim_failures", "failed"};
  for (const auto& n : names) header.push_back("phi_" + n);
  for (const auto& n : names) header.push_back("grad_" + n);
  std::vector<std::vector<double>> rows;
  rows.reserve(trace.records.size());
  for (const auto& r : trace.records) {
    std::vector<double> row{static_cast<double>(r.iter), r.bound, r.smoothed, r.grad_norm,
                            static_cast<double>(r.sim_failures), r.failed ? 1.0 : 0.0};
    row.insert(row.end(), r.phi.begin(), r.phi.end());
    row.insert(row.end(), r.grad.begin(), r.grad.end());
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void write_trace_json(const RunTrace& trace, const fs::path& path) {
  json j;
  j["family"] = to_string(trace.family);
  j["param_names"] = VariationalFamily::from_phi(trace.family, trace.initial_phi).param_names();
  j["initial_phi"] = trace.initial_phi;
  j["final_phi"] = trace.final_phi;
  j["convergence_iteration"] = optional_index(trace.convergence_iteration);
  j["termination"] = to_string(trace.termination);
  j["diagnostic"] = trace.diagnostic;
  json records = json::array();
  for (const auto& r : trace.records) {
    records.push_back({{"iter", r.iter},
                       {"bound", r.bound},
                       {"smoothed", r.smoothed},
                       {"phi", r.phi},
                       {"grad", r.grad},
                       {"grad_norm", r.grad_norm},
                       {"wall_time", r.wall_time},
                       {"sim_failures", r.sim_failures},
                       {"failed", r.failed},
                       {"mean_statistics", r.mean_statistics}});
  }
  j["records"] = std::move(records);
  open_out(path) << j.dump(1) << '\n';
}

void write_final_posterior(const RunTrace& trace, const ExperimentConfig& config, const fs::path& path) {
  const VariationalFamily q = trace.final_family();
  json j;
  j["name"] = config.name;
  j["simulator"] = config.simulator.name;
  j["estimator"] = to_string(config.estimator);
  j["family"] = to_string(q.kind());
  j["param_names"] = q.param_names();
  j["phi"] = q.phi();
  j["constrained_params"] = q.constrained();
  j["mean"] = q.mean();
  std::vector<double> sd;
  for (double v : q.variance()) sd.push_back(std::sqrt(v));
  j["std"] = sd;
  j["termination"] = to_string(trace.termination);
  j["convergence_iteration"] = optional_index(trace.convergence_iteration);
  j["iterations"] = trace.records.empty() ? 0 : trace.records.back().iter;
  j["final_bound"] = trace.records.empty() ? 0.0 : trace.records.back().bound;
  j["final_smoothed_bound"] = trace.records.empty() ? 0.0 : trace.records.back().smoothed;
  j["diagnostic"] = trace.diagnostic;
  open_out(path) << j.dump(2) << '\n';
}

void write_run_artifacts(const RunTrace& trace, const ExperimentConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  ExperimentConfig resolved = config;
  resolved.observation_file.clear();
  save_config(resolved, dir / "config_resolved.json");
  write_trace_csv(trace, dir / "trace.csv");
  write_trace_json(trace, dir / "trace.json");
  write_final_posterior(trace, config, dir / "final_posterior.json");
}

int execute_run(const ExperimentConfig& config, const fs::path& out_dir) {
  const RunConfig rc = to_run_config(config);
  const RunTrace trace = run(rc);
  write_run_artifacts(trace, config, out_dir);
  const VariationalFamily q = trace.final_family();
  std::cout << "run '" << config.name << "' (" << to_string(config.estimator) << ", seed " << config.seed << "): "
            << to_string(trace.termination) << " after " << trace.records.back().iter << " iterations";
  if (trace.convergence_iteration) std::cout << ", converged at " << *trace.convergence_iteration;
  std::cout << "\n  final smoothed bound " << trace.records.back().smoothed << "\n  posterior mean";
  for (double m : q.mean()) std::cout << ' ' << m;
  std::cout << "\n  artifacts in " << out_dir.string() << '\n';
  if (!trace.diagnostic.empty()) std::cerr << "diagnostic: " << trace.diagnostic << '\n';
  return exit_code(trace.termination);
}

// ---------------------------------------------------------------------------

CompareReport execute_compare(const ExperimentConfig& config, EstimatorKind against, const fs::path& out_dir,
                              std::size_t n_repeats) {
  ExperimentConfig cb = config;
  cb.estimator = against;
  const RunConfig a = to_run_config(config);
  const RunConfig b = to_run_config(cb);
  const std::size_t sizes[] = {1, 10};
  CompareReport report = compare_runs(a, b, sizes, n_repeats);

  write_run_artifacts(report.a, config, out_dir / "a");
  write_run_artifacts(report.b, cb, out_dir / "b");

  auto side = [](const RunTrace& t, const ExperimentConfig& c) {
    return json{{"estimator", to_string(c.estimator)},
                {"termination", to_string(t.termination)},
                {"convergence_iteration", optional_index(t.convergence_iteration)},
                {"iterations", t.records.back().iter},
                {"final_bound", t.records.back().bound},
                {"final_smoothed_bound", t.records.back().smoothed},
                {"final_phi", t.final_phi}};
  };
  json j;
  j["name"] = config.name;
  j["seed"] = config.seed;
  j["a"] = side(report.a, config);
  j["b"] = side(report.b, cb);
  j["identical_traces"] = report.identical_traces;
  j["zero_difference"] = report.identical_traces;
  j["convergence_ratio"] = report.convergence_ratio;
  j["convergence_ratio_definition"] = "b convergence iteration / a convergence iteration";
  json profiles = json::array();
  const auto names = VariationalFamily::from_phi(report.a.family, report.a.final_phi).param_names();
  std::vector<std::string> header{"at", "samples", "repeat"};
  for (const auto& n : names) header.push_back("grad_" + n);
  std::vector<std::vector<double>> rows_pathwise, rows_score;
  for (const auto& p : report.profiles) {
    profiles.push_back({{"estimator", to_string(p.estimator)},
                        {"at", p.at},
                        {"samples", p.samples},
                        {"simulations", p.samples},
                        {"repeats", p.profile.samples.size()},
                        {"mean", p.profile.mean},
                        {"variance", p.profile.variance}});
    auto& rows = p.estimator == EstimatorKind::kPathwise ? rows_pathwise : rows_score;
    for (std::size_t r = 0; r < p.profile.samples.size(); ++r) {
      std::vector<double> row{p.at == "a" ? 0.0 : 1.0, static_cast<double>(p.samples), static_cast<double>(r)};
      row.insert(row.end(), p.profile.samples[r].begin(), p.profile.samples[r].end());
      rows.push_back(std::move(row));
    }
  }
  j["profiles"] = std::move(profiles);
  j["histogram_at_encoding"] = "0 = final phi of run a, 1 = final phi of run b";
  fs::create_directories(out_dir);
  open_out(out_dir / "compare.json") << j.dump(2) << '\n';
  write_csv(out_dir / ("gradient_hist_" + kind_label(EstimatorKind::kPathwise) + ".csv"), header, rows_pathwise);
  write_csv(out_dir / ("gradient_hist_" + kind_label(EstimatorKind::kScoreFunction) + ".csv"), header, rows_score);
  return report;
}

// ---------------------------------------------------------------------------

std::optional<Prior> posterior_oracle(const ExperimentConfig& c) {
  if (c.observation.statistics.size() != 1) return std::nullopt;
  const double y = c.observation.statistics[0];
  if (c.simulator.name == "bernoulli" && c.prior.kind == PriorKind::kBeta) {
    const double M = static_cast<double>(c.simulator.trials);
    return Prior::beta(c.prior.first[0] + y, c.prior.second[0] + M - y);
  }
  if (c.simulator.name == "exponential" && c.prior.kind == PriorKind::kGamma) {
    const double M = static_cast<double>(c.simulator.samples);
    return Prior::gamma(c.prior.first[0] + M, c.prior.second[0] + M * y);
  }
  return std::nullopt;
}

KlEstimate monte_carlo_kl(const VariationalFamily& q, const Prior& p, std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw Error("posterior check needs at least two draws");
  check_compatible(q, p);
  Engine eng = RngStream(seed).substream(DrawKind::kReplicate, 0, 0);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < draws; ++i) {
    const auto theta = q.sample(q.draw_base(eng));
    const double d = q.log_pdf(theta) - prior_log_pdf(p, theta);
    sum += d;
    sum_sq += d * d;
  }
  const double n = static_cast<double>(draws);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return {mean, std::sqrt(var / n)};
}

PosteriorCheck posterior_check(const VariationalFamily& q, const Prior& oracle, std::size_t draws,
                               std::uint64_t seed) {
  PosteriorCheck out;
  out.fitted_mean = q.mean();
  for (double v : q.variance()) out.fitted_std.push_back(std::sqrt(v));
  out.oracle_mean = oracle.mean();
  for (double v : oracle.variance()) out.oracle_std.push_back(std::sqrt(v));
  out.kl = monte_carlo_kl(q, oracle, draws, seed);
  out.draws = draws;
  return out;
}

RunArtifacts load_run_artifacts(const fs::path& run_dir) {
  if (!fs::is_directory(run_dir)) throw Error("run directory " + run_dir.string() + " does not exist");
  RunArtifacts a{load_config(run_dir / "config_resolved.json"), VariationalFamily::kumaraswamy(1.0, 1.0)};
  const json post = read_json(run_dir / "final_posterior.json");
  try {
    a.family = VariationalFamily::from_phi(family_kind_from_string(post.at("family").get<std::string>()),
                                           post.at("phi").get<std::vector<double>>());
  } catch (const json::exception& e) {
    throw Error((run_dir / "final_posterior.json").string() + ": " + e.what());
  }
  return a;
}

// ---------------------------------------------------------------------------

std::vector<double> density_grid(const VariationalFamily& q, std::size_t d, std::size_t points) {
  if (d >= q.dim()) throw Error("density grid: component out of range");
  if (points < 2) throw Error("density grid needs at least two points");
  std::vector<double> grid(points);
  const double n = static_cast<double>(points);
  if (q.kind() == FamilyKind::kKumaraswamy) {
    for (std::size_t i = 0; i < points; ++i) grid[i] = (static_cast<double>(i) + 0.5) / n;
    return grid;
  }
  const auto c = q.constrained();
  const double mu = c[d], sigma = c[q.dim() + d];
  double lo = mu - 4.0 * sigma, hi = mu + 4.0 * sigma;
  if (q.kind() == FamilyKind::kLogNormal) {
    lo = std::exp(lo);
    hi = std::exp(hi);
  }
  for (std::size_t i = 0; i < points; ++i) grid[i] = lo + (hi - lo) * static_cast<double>(i) / (n - 1.0);
  return grid;
}

double marginal_density(const VariationalFamily& q, std::size_t d, double x) {
  if (q.kind() != FamilyKind::kDiagonalGaussian) {
    if (q.kind() == FamilyKind::kLogNormal && !(x > 0.0)) return 0.0;
    if (q.kind() == FamilyKind::kKumaraswamy && !(x > 0.0 && x < 1.0)) return 0.0;
    const double theta[] = {x};
    return std::exp(q.log_pdf(theta));
  }
  const auto c = q.constrained();
  const double z = (x - c[d]) / c[q.dim() + d];
  return std::exp(-0.5 * z * z) / (c[q.dim() + d] * std::sqrt(2.0 * std::numbers::pi));
}

namespace {

double prior_marginal_density(const Prior& p, std::size_t d, double x) {
  const Prior one{p.kind, {p.first[d]}, {p.second[d]}};
  const double theta[] = {x};
  if (p.kind == PriorKind::kBeta && !(x > 0.0 && x < 1.0)) return 0.0;
  if (p.kind == PriorKind::kGamma && !(x > 0.0)) return 0.0;
  return std::exp(prior_log_pdf(one, theta));
}

}  // namespace

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) throw Error("percentile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SeriesBand simulate_series_band(const BlowflySimulator& sim, std::span<const double> theta, std::uint64_t seed,
                                std::size_t replicates) {
  const RngStream rng(seed);
  const std::size_t T = sim.config().horizon;
  std::vector<std::vector<double>> by_time(T);
  for (std::size_t r = 0; r < replicates; ++r) {
    Engine eng = rng.substream(DrawKind::kReplicate, 0, r);
    const auto u = sim.draw_noise(eng);
    Tape tape;
    std::vector<Var> th;
    for (double t : theta) th.push_back(tape.constant(t));
    const auto traj = sim.trajectory(th, u);
    for (std::size_t t = 0; t < T; ++t) by_time[t].push_back(traj[t].value());
  }
  SeriesBand band;
  for (auto& col : by_time) {
    double m = 0.0;
    for (double v : col) m += v;
    band.mean.push_back(m / static_cast<double>(col.size()));
    band.p10.push_back(percentile(col, 10.0));
    band.p90.push_back(percentile(col, 90.0));
  }
  return band;
}

void emit_plotdata(const fs::path& run_dir, const fs::path& out_dir) {
  const RunArtifacts art = load_run_artifacts(run_dir);
  const json trace = read_json(run_dir / "trace.json");

  std::vector<std::vector<double>> lb;
  for (const auto& r : trace.at("records")) {
    lb.push_back({r.at("iter").get<double>(), r.at("bound").get<double>(), r.at("smoothed").get<double>()});
  }
  write_csv(out_dir / "lower_bound.csv", {"iter", "bound", "smoothed"}, lb);

  const VariationalFamily& q = art.family;
  const Prior& prior = art.config.prior;
  const std::optional<Prior> oracle = posterior_oracle(art.config);
  std::vector<std::string> header{"component", "theta", "q_density", "prior_density"};
  if (oracle) header.push_back("oracle_density");
  std::vector<std::vector<double>> rows;
  for (std::size_t d = 0; d < q.dim(); ++d) {
    for (double x : density_grid(q, d)) {
      std::vector<double> row{static_cast<double>(d), x, marginal_density(q, d, x), prior_marginal_density(prior, d, x)};
      if (oracle) row.push_back(prior_marginal_density(*oracle, d, x));
      rows.push_back(std::move(row));
    }
  }
  write_csv(out_dir / "posterior_density.csv", header, rows);

  if (art.config.simulator.name == "blowfly") {
    const auto sim = std::dynamic_pointer_cast<const BlowflySimulator>(make_simulator(art.config));
    const auto& observed = art.config.observation.raw;
    const SeriesBand band = simulate_series_band(*sim, q.mean(), art.config.seed);
    std::vector<std::vector<double>> srows;
    for (std::size_t t = 0; t < band.mean.size(); ++t) {
      const double obs = t < observed.size() ? observed[t] : std::nan("");
      srows.push_back({static_cast<double>(t), obs, band.mean[t], band.p10[t], band.p90[t]});
    }
    write_csv(out_dir / "blowfly_series.csv", {"t", "observed", "simulated_mean", "simulated_p10", "simulated_p90"},
              srows);
  }
}

// ---------------------------------------------------------------------------

Observation synthesize_blowfly_observation(const SimulatorSpec& spec, std::span<const double> theta_star,
                                           std::uint64_t seed) {
  BlowflyConfig cfg;
  cfg.horizon = spec.horizon;
  cfg.lag = spec.lag;
  cfg.initial_population = spec.initial_population;
  const BlowflySimulator sim(cfg);
  if (theta_star.size() != sim.theta_dim()) throw Error("blowfly theta* must have 5 entries");
  if (spec.peak_threshold_multiples.size() != 2) throw Error("expected two peak threshold multiples");
  Engine eng = RngStream(seed).substream(DrawKind::kObservation, 0, 0);
  const auto u = sim.draw_noise(eng);
  Tape tape;
  std::vector<Var> th;
  for (double t : theta_star) th.push_back(tape.constant(t));
  Observation obs;
  obs.simulator = "blowfly";
  for (const Var& v : sim.trajectory(th, u)) obs.raw.push_back(v.value());
  double mean = 0.0;
  for (double v : obs.raw) mean += v;
  mean /= static_cast<double>(obs.raw.size());
  const std::array<double, 2> thresholds{spec.peak_threshold_multiples[0] * mean,
                                         spec.peak_threshold_multiples[1] * mean};
  obs.statistics = blowfly_statistics(obs.raw, thresholds);
  obs.provenance.kind = Provenance::Kind::kSynthetic;
  obs.provenance.theta_star.assign(theta_star.begin(), theta_star.end());
  obs.provenance.seed = seed;
  std::ostringstream note;
  note << "synthetic series, horizon " << cfg.horizon << ", lag " << cfg.lag << ", initial population "
       << cfg.initial_population << "; theta = (log P, log delta, log N0, log sigma_d, log sigma_p)";
  obs.provenance.note = note.str();
  return obs;
}

// ---------------------------------------------------------------------------

namespace {

struct ExperimentArgs {
  std::string positional;
  std::string preset;
  std::string config;
  std::string out;
  Overrides overrides;
};

void add_experiment_options(CLI::App* cmd, ExperimentArgs& a) {
  cmd->add_option("preset_name", a.positional, "Preset name (bernoulli, exponential, blowfly)");
  cmd->add_option("--preset", a.preset, "Preset name");
  cmd->add_option("--config", a.config, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.overrides.seed, "Master seed");
  cmd->add_option("--estimator", a.overrides.estimator, "pathwise or score_function")
      ->check(CLI::IsMember({"pathwise", "score_function"}));
  cmd->add_option("--samples", a.overrides.samples, "S, variational samples per iteration")->check(CLI::PositiveNumber);
  cmd->add_option("--sims", a.overrides.simulations, "L, simulations per sample")->check(CLI::PositiveNumber);
  cmd->add_option("--latent-samples", a.overrides.latent_samples, "K, latent draws per sample")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--max-iters", a.overrides.max_iters, "Iteration budget");
  cmd->add_option("--optimizer", a.overrides.optimizer, "adam or adagrad")->check(CLI::IsMember({"adam", "adagrad"}));
  cmd->add_option("--out", a.out, "Output directory");
}

ExperimentConfig resolve(const ExperimentArgs& a) {
  std::string preset_name = !a.preset.empty() ? a.preset : a.positional;
  if (!a.preset.empty() && !a.positional.empty() && a.preset != a.positional) {
    throw Error("conflicting presets '" + a.positional + "' and '" + a.preset + "'");
  }
  if (!preset_name.empty() && !a.config.empty()) throw Error("give either a preset or --config, not both");
  if (preset_name.empty() && a.config.empty()) throw Error("a preset or --config is required");
  ExperimentConfig c = a.config.empty() ? preset(preset_name) : load_config(a.config);
  apply_overrides(c, a.overrides);
  return c;
}

fs::path output_dir(const ExperimentArgs& a, const ExperimentConfig& c, const std::string& suffix) {
  if (!a.out.empty()) return a.out;
  return default_output_root() / (c.name + "-" + suffix + "-seed" + std::to_string(c.seed));
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Automatic variational ABC: likelihood-free posterior inference by pathwise gradients"};
  app.require_subcommand(1);

  ExperimentArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Fit a variational posterior and write trace and posterior artifacts");
  add_experiment_options(run_cmd, run_args);

  ExperimentArgs cmp_args;
  std::string against = "score_function";
  std::size_t repeats = kHistogramRepeats;
  auto* cmp_cmd = app.add_subcommand("compare", "Paired runs of two estimators plus gradient-variance profiles");
  add_experiment_options(cmp_cmd, cmp_args);
  cmp_cmd->add_option("--against", against, "Estimator of the second run")
      ->check(CLI::IsMember({"pathwise", "score_function"}));
  cmp_cmd->add_option("--repeats", repeats, "Gradient samples per profile")->check(CLI::Range(2, 1000000));

  std::string check_dir, check_out;
  std::size_t draws = 100000;
  auto* check_cmd = app.add_subcommand("posterior-check", "Compare a fitted posterior with the exact one");
  check_cmd->add_option("run_dir", check_dir, "Run output directory")->required();
  check_cmd->add_option("--draws", draws, "Monte-Carlo draws for KL(q || oracle)")->check(CLI::Range(2, 100000000));
  check_cmd->add_option("--out", check_out, "Report path (default RUN_DIR/posterior_check.json)");

  std::string plot_dir, plot_out;
  auto* plot_cmd = app.add_subcommand("emit-plotdata", "Write CSV plot data for a finished run");
  plot_cmd->add_option("run_dir", plot_dir, "Run output directory")->required();
  plot_cmd->add_option("--out", plot_out, "Output directory (default RUN_DIR)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitError;
  }

  try {
    if (run_cmd->parsed()) {
      const ExperimentConfig c = resolve(run_args);
      return execute_run(c, output_dir(run_args, c, to_string(c.estimator)));
    }
    if (cmp_cmd->parsed()) {
      const ExperimentConfig c = resolve(cmp_args);
      const fs::path out = output_dir(cmp_args, c, "compare");
      const CompareReport r = execute_compare(c, estimator_kind_from_string(against), out, repeats);
      auto conv = [](const RunTrace& t) {
        return t.convergence_iteration ? std::to_string(*t.convergence_iteration) : std::string("none");
      };
      std::cout << "compare '" << c.name << "': a=" << to_string(c.estimator) << " converged at " << conv(r.a)
                << ", b=" << against << " converged at " << conv(r.b) << ", ratio b/a " << r.convergence_ratio
                << (r.identical_traces ? " (identical traces)" : "") << "\n  artifacts in " << out.string() << '\n';
      return kExitConverged;
    }
    if (check_cmd->parsed()) {
      const RunArtifacts art = load_run_artifacts(check_dir);
      const auto oracle = posterior_oracle(art.config);
      if (!oracle) {
        throw Error("no exact posterior for simulator '" + art.config.simulator.name + "' with a " +
                    to_string(art.config.prior.kind) + " prior");
      }
      const PosteriorCheck pc = posterior_check(art.family, *oracle, draws, art.config.seed);
      json j;
      j["oracle"] = {{"kind", to_string(oracle->kind)}, {"first", oracle->first}, {"second", oracle->second}};
      j["fitted_mean"] = pc.fitted_mean;
      j["fitted_std"] = pc.fitted_std;
      j["oracle_mean"] = pc.oracle_mean;
      j["oracle_std"] = pc.oracle_std;
      std::vector<double> mean_err, std_err;
      for (std::size_t i = 0; i < pc.fitted_mean.size(); ++i) {
        mean_err.push_back(pc.fitted_mean[i] - pc.oracle_mean[i]);
        std_err.push_back(pc.fitted_std[i] - pc.oracle_std[i]);
      }
      j["mean_error"] = mean_err;
      j["std_error"] = std_err;
      j["kl_q_oracle"] = pc.kl.value;
      j["kl_standard_error"] = pc.kl.standard_error;
      j["draws"] = pc.draws;
      const fs::path out = check_out.empty() ? fs::path(check_dir) / "posterior_check.json" : fs::path(check_out);
      open_out(out) << j.dump(2) << '\n';
      std::cout << "posterior check: fitted mean " << pc.fitted_mean[0] << " vs exact " << pc.oracle_mean[0]
                << ", fitted std " << pc.fitted_std[0] << " vs exact " << pc.oracle_std[0] << ", KL(q || exact) "
                << pc.kl.value << " +/- " << pc.kl.standard_error << "\n  report in " << out.string() << '\n';
      return kExitConverged;
    }
    if (plot_cmd->parsed()) {
      const fs::path out = plot_out.empty() ? fs::path(plot_dir) : fs::path(plot_out);
      emit_plotdata(plot_dir, out);
      std::cout << "plot data in " << out.string() << '\n';
      return kExitConverged;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace avabc
