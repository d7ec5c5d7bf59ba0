#include "avabc/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#ifndef AVABC_SOURCE_DATA_DIR
#define AVABC_SOURCE_DATA_DIR "data"
#endif

namespace avabc {

using nlohmann::json;

namespace {

std::string with_location(const std::string& what, const std::string& field, std::size_t line,
                          const std::string& source) {
  std::string out = source;
  if (line > 0) out += ":" + std::to_string(line);
  if (!field.empty()) out += ": field '" + field + "'";
  return out + ": " + what;
}

// 1-based line of the first occurrence of "key" in text, or 0.
std::size_t line_of_key(const std::string* text, const std::string& key) {
  if (text == nullptr || key.empty()) return 0;
  const auto pos = text->find("\"" + key + "\"");
  if (pos == std::string::npos) return 0;
  std::size_t line = 1;
  for (std::size_t i = 0; i < pos; ++i) line += (*text)[i] == '\n';
  return line;
}

// Walks one JSON object, type-checking fields and rejecting unknown keys.
class Reader {
 public:
  Reader(const json& j, std::string path, const std::string* text) : j_(j), path_(std::move(path)), text_(text) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    const std::string field = key.empty() ? path_ : (path_.empty() ? key : path_ + "." + key);
    const std::string leaf = key.empty() ? path_.substr(path_.rfind('.') == std::string::npos ? 0 : path_.rfind('.') + 1) : key;
    throw ConfigError(what, field, line_of_key(text_, leaf));
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void read(const std::string& key, T& out) {
    if (!has(key)) return;
    out = convert<T>(key, at(key));
  }

  void read_vector(const std::string& key, std::vector<double>& out) {
    if (!has(key)) return;
    const json& v = at(key);
    if (v.is_number()) {
      out = {v.get<double>()};
      return;
    }
    if (!v.is_array()) fail(key, "expected a number or an array of numbers");
    out.clear();
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  Reader object(const std::string& key) { return Reader(at(key), join(key), text_); }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(item.key(), "unknown field");
    }
  }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  T convert(const std::string& key, const json& v) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) fail(key, "expected a number");
      return v.get<double>();
    } else {
      static_assert(std::is_integral_v<T>);
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        fail(key, "expected a non-negative integer");
      }
      return static_cast<T>(v.get<std::uint64_t>());
    }
  }

  const json& j_;
  std::string path_;
  const std::string* text_;
  std::set<std::string> seen_;
};

void read_simulator(Reader r, SimulatorSpec& s) {
  r.read("name", s.name);
  r.read("trials", s.trials);
  r.read("samples", s.samples);
  r.read("horizon", s.horizon);
  r.read("lag", s.lag);
  r.read("initial_population", s.initial_population);
  r.read_vector("peak_threshold_multiples", s.peak_threshold_multiples);
  r.read("dim", s.dim);
  r.read("noise_std", s.noise_std);
  r.finish();
}

void read_observation(Reader r, ExperimentConfig& c, const std::filesystem::path& base_dir) {
  if (r.has("file")) {
    std::string file;
    r.read("file", file);
    r.finish();
    std::filesystem::path p(file);
    if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
    try {
      c.observation = load_observation(p);
    } catch (const Error& e) {
      r.fail("file", e.what());
    }
    c.observation_file = p.string();
    return;
  }
  Observation obs;
  std::string format;
  r.read("format", format);
  r.read("simulator", obs.simulator);
  r.read_vector("statistics", obs.statistics);
  r.read_vector("raw_series", obs.raw);
  if (r.has("provenance")) {
    Reader p = r.object("provenance");
    std::string kind = "fixed";
    p.read("kind", kind);
    if (kind == "synthetic") {
      obs.provenance.kind = Provenance::Kind::kSynthetic;
    } else if (kind != "fixed") {
      p.fail("kind", "expected 'fixed' or 'synthetic'");
    }
    p.read_vector("theta_star", obs.provenance.theta_star);
    p.read("seed", obs.provenance.seed);
    p.read("note", obs.provenance.note);
    p.finish();
  }
  r.finish();
  if (obs.statistics.empty()) r.fail("statistics", "observation needs at least one statistic");
  c.observation = std::move(obs);
  c.observation_file.clear();
}

void read_prior(Reader r, Prior& prior) {
  std::string kind = to_string(prior.kind);
  r.read("kind", kind);
  try {
    prior.kind = prior_kind_from_string(kind);
  } catch (const Error& e) {
    r.fail("kind", e.what());
  }
  const char* first = "mean";
  const char* second = "std";
  if (prior.kind == PriorKind::kBeta) {
    first = "alpha";
    second = "beta";
  } else if (prior.kind == PriorKind::kGamma) {
    first = "shape";
    second = "rate";
  }
  r.read_vector(first, prior.first);
  r.read_vector(second, prior.second);
  r.finish();
  try {
    prior.validate();
  } catch (const Error& e) {
    r.fail("", e.what());
  }
}

void read_family(Reader r, ExperimentConfig& c) {
  std::string kind = to_string(c.family);
  r.read("kind", kind);
  try {
    c.family = family_kind_from_string(kind);
  } catch (const Error& e) {
    r.fail("kind", e.what());
  }
  r.read_vector("params", c.family_params);
  if (r.has("random_init")) {
    if (r.at("random_init").is_null()) {
      c.random_init.reset();
    } else {
      Reader ri = r.object("random_init");
      RandomInit init;
      ri.read("low", init.low);
      ri.read("high", init.high);
      ri.finish();
      c.random_init = init;
    }
  }
  r.finish();
  try {
    (void)VariationalFamily::from_constrained(c.family, c.family_params);
  } catch (const Error& e) {
    r.fail("params", e.what());
  }
}

void read_epsilon(Reader r, EpsilonPolicy& eps) {
  std::string kind = to_string(eps.kind);
  r.read("kind", kind);
  try {
    eps.kind = epsilon_kind_from_string(kind);
  } catch (const Error& e) {
    r.fail("kind", e.what());
  }
  r.read_vector("value", eps.value);
  r.finish();
}

void read_optimizer(Reader r, OptimizerSpec& opt) {
  std::string kind = to_string(opt.kind);
  r.read("kind", kind);
  try {
    const OptimizerKind k = optimizer_kind_from_string(kind);
    // Switching kind without an explicit rate picks that optimizer's default.
    if (k != opt.kind && !r.has("learning_rate")) {
      opt = k == OptimizerKind::kAdam ? OptimizerSpec::adam() : OptimizerSpec::adagrad();
    }
    opt.kind = k;
  } catch (const Error& e) {
    r.fail("kind", e.what());
  }
  r.read("learning_rate", opt.learning_rate);
  r.read("beta1", opt.beta1);
  r.read("beta2", opt.beta2);
  r.read("stabilizer", opt.stabilizer);
  r.finish();
  try {
    opt.validate();
  } catch (const Error& e) {
    r.fail("", e.what());
  }
}

void read_convergence(Reader r, ExperimentConfig& c) {
  r.read("window", c.convergence.window);
  r.read("threshold", c.convergence.threshold);
  r.read("smoothing", c.convergence.smoothing);
  r.read("stop_on_convergence", c.stop_on_convergence);
  r.finish();
}

json prior_json(const Prior& p) {
  json j;
  j["kind"] = to_string(p.kind);
  if (p.kind == PriorKind::kBeta) {
    j["alpha"] = p.first;
    j["beta"] = p.second;
  } else if (p.kind == PriorKind::kGamma) {
    j["shape"] = p.first;
    j["rate"] = p.second;
  } else {
    j["mean"] = p.first;
    j["std"] = p.second;
  }
  return j;
}

Observation fixed_observation(const std::string& simulator, std::vector<double> stats, std::string note) {
  Observation obs;
  obs.simulator = simulator;
  obs.statistics = std::move(stats);
  obs.provenance.kind = Provenance::Kind::kFixed;
  obs.provenance.note = std::move(note);
  return obs;
}

}  // namespace

ConfigError::ConfigError(const std::string& message, std::string field, std::size_t line, std::string source)
    : Error(with_location(message, field, line, source)), message_(message), field_(std::move(field)), line_(line) {}

std::filesystem::path data_dir() {
  if (const char* env = std::getenv("AVABC_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return AVABC_SOURCE_DATA_DIR;
}

std::vector<std::string> preset_names() { return {"bernoulli", "exponential", "blowfly"}; }

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  if (name == "bernoulli") {
    c.seed = 1;
    c.simulator.name = "bernoulli";
    c.simulator.trials = 100;
    c.observation = fixed_observation("bernoulli", {70.0}, "k = 70 successes in M = 100 trials");
    c.prior = Prior::beta(1.0, 1.0);
    c.family = FamilyKind::kKumaraswamy;
    c.family_params = {1.0, 1.0};
    c.epsilon = EpsilonPolicy::bernoulli_analytic();
    c.optimizer = OptimizerSpec::adam(0.2);
    c.max_iters = 1000;
    c.convergence = {100, 0.02, 0.9};
  } else if (name == "exponential") {
    c.seed = 1;
    c.simulator.name = "exponential";
    c.simulator.samples = 15;
    c.observation = fixed_observation("exponential", {1.0}, "ybar = 1 for true rate 1 and M = 15");
    c.prior = Prior::gamma(1.0, 1.0);
    c.family = FamilyKind::kLogNormal;
    c.family_params = {2.5, 2.5};
    c.random_init = RandomInit{2.0, 3.0};
    c.epsilon = EpsilonPolicy::simulation_scaled();
    c.optimizer = OptimizerSpec::adam(0.1);
    c.max_iters = 6000;
    c.convergence = {1000, 0.01, 0.9};
  } else if (name == "blowfly") {
    c.seed = 1;
    c.simulator.name = "blowfly";
    c.observation_file = (data_dir() / "blowfly_observation.json").string();
    c.observation = load_observation(c.observation_file);
    const std::vector<double> mean{2.0, -1.8, 6.0, -0.75, -0.5};
    const std::vector<double> stddev{0.5, 0.5, 0.5, 0.5, 0.5};
    c.prior = Prior::diagonal_gaussian(mean, stddev);
    c.family = FamilyKind::kDiagonalGaussian;
    c.family_params = mean;
    c.family_params.insert(c.family_params.end(), stddev.begin(), stddev.end());
    // Roughly the spread of each statistic across simulations at theta*.
    c.epsilon = EpsilonPolicy::fixed({40.0, 60.0, 220.0, 460.0, 55.0, 15.0, 20.0, 70.0, 2.5, 2.5});
    c.optimizer = OptimizerSpec::adam(0.01);
    c.max_iters = 2000;
    c.convergence = {200, 0.01, 0.9};
    c.stop_on_convergence = false;
  } else {
    std::string names;
    for (const auto& n : preset_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (available: " + names + ")", "preset");
  }
  return c;
}

std::string config_to_json(const ExperimentConfig& c) {
  json j;
  j["format"] = kConfigFormat;
  j["name"] = c.name;
  j["seed"] = c.seed;
  json sim;
  sim["name"] = c.simulator.name;
  if (c.simulator.name == "bernoulli") {
    sim["trials"] = c.simulator.trials;
  } else if (c.simulator.name == "exponential") {
    sim["samples"] = c.simulator.samples;
  } else if (c.simulator.name == "blowfly") {
    sim["horizon"] = c.simulator.horizon;
    sim["lag"] = c.simulator.lag;
    sim["initial_population"] = c.simulator.initial_population;
    sim["peak_threshold_multiples"] = c.simulator.peak_threshold_multiples;
  } else {
    sim["dim"] = c.simulator.dim;
    sim["noise_std"] = c.simulator.noise_std;
  }
  j["simulator"] = sim;
  j["observation"] = json::parse(observation_to_json(c.observation));
  j["prior"] = prior_json(c.prior);
  json fam;
  fam["kind"] = to_string(c.family);
  fam["params"] = c.family_params;
  if (c.random_init) {
    fam["random_init"] = {{"low", c.random_init->low}, {"high", c.random_init->high}};
  } else {
    fam["random_init"] = nullptr;
  }
  j["family"] = fam;
  j["estimator"] = to_string(c.estimator);
  j["samples"] = c.samples;
  j["simulations"] = c.simulations;
  j["latent_samples"] = c.latent_samples;
  j["kl_samples"] = c.kl_samples;
  json eps;
  eps["kind"] = to_string(c.epsilon.kind);
  if (c.epsilon.kind == EpsilonKind::kFixed) eps["value"] = c.epsilon.value;
  j["epsilon"] = eps;
  j["optimizer"] = {{"kind", to_string(c.optimizer.kind)},
                    {"learning_rate", c.optimizer.learning_rate},
                    {"beta1", c.optimizer.beta1},
                    {"beta2", c.optimizer.beta2},
                    {"stabilizer", c.optimizer.stabilizer}};
  j["max_iters"] = c.max_iters;
  j["convergence"] = {{"window", c.convergence.window},
                      {"threshold", c.convergence.threshold},
                      {"smoothing", c.convergence.smoothing},
                      {"stop_on_convergence", c.stop_on_convergence}};
  j["control_variate_window"] = c.cv_window;
  j["max_consecutive_failures"] = c.max_consecutive_failures;
  j["reinitialize_on_failure"] = c.reinitialize_on_failure;
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
    throw ConfigError(std::string("malformed JSON: ") + e.what(), "", line);
  }
  Reader r(j, "", &text);
  std::string format = kConfigFormat;
  r.read("format", format);
  if (format != kConfigFormat) r.fail("format", std::string("expected \"") + kConfigFormat + "\"");

  ExperimentConfig c;
  if (r.has("preset")) {
    std::string name;
    r.read("preset", name);
    try {
      c = preset(name);
    } catch (const Error& e) {
      r.fail("preset", e.what());
    }
  }
  r.read("name", c.name);
  r.read("seed", c.seed);
  if (r.has("simulator")) read_simulator(r.object("simulator"), c.simulator);
  if (r.has("observation")) read_observation(r.object("observation"), c, base_dir);
  if (r.has("prior")) read_prior(r.object("prior"), c.prior);
  if (r.has("family")) read_family(r.object("family"), c);
  if (r.has("estimator")) {
    std::string name;
    r.read("estimator", name);
    try {
      c.estimator = estimator_kind_from_string(name);
    } catch (const Error& e) {
      r.fail("estimator", e.what());
    }
  }
  r.read("samples", c.samples);
  r.read("simulations", c.simulations);
  r.read("latent_samples", c.latent_samples);
  r.read("kl_samples", c.kl_samples);
  if (r.has("epsilon")) read_epsilon(r.object("epsilon"), c.epsilon);
  if (r.has("optimizer")) read_optimizer(r.object("optimizer"), c.optimizer);
  r.read("max_iters", c.max_iters);
  if (r.has("convergence")) read_convergence(r.object("convergence"), c);
  r.read("control_variate_window", c.cv_window);
  r.read("max_consecutive_failures", c.max_consecutive_failures);
  r.read("reinitialize_on_failure", c.reinitialize_on_failure);
  r.finish();
  if (c.observation.statistics.empty()) r.fail("observation", "missing (give statistics, a file, or a preset)");
  if (c.name.empty()) c.name = c.simulator.name;
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string(), "");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return config_from_json(ss.str(), path.parent_path());
  } catch (const ConfigError& e) {
    throw ConfigError(e.message(), e.field(), e.line(), path.string());
  }
}

void save_config(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << config_to_json(config);
}

std::shared_ptr<const Simulator> make_simulator(const ExperimentConfig& c) {
  const SimulatorSpec& s = c.simulator;
  if (s.name == "bernoulli") return std::make_shared<BernoulliSimulator>(s.trials);
  if (s.name == "exponential") return std::make_shared<ExponentialSimulator>(s.samples);
  if (s.name == "linear_gaussian") return std::make_shared<LinearGaussianSimulator>(s.dim, s.noise_std);
  if (s.name == "blowfly") {
    BlowflyConfig b;
    b.horizon = s.horizon;
    b.lag = s.lag;
    b.initial_population = s.initial_population;
    if (s.peak_threshold_multiples.size() != 2) {
      throw ConfigError("expected two peak threshold multiples", "simulator.peak_threshold_multiples");
    }
    if (c.observation.raw.empty()) {
      throw ConfigError("blowfly peak thresholds need the observed raw_series", "observation.raw_series");
    }
    double mean = 0.0;
    for (double v : c.observation.raw) mean += v;
    mean /= static_cast<double>(c.observation.raw.size());
    b.peak_thresholds = {s.peak_threshold_multiples[0] * mean, s.peak_threshold_multiples[1] * mean};
    return std::make_shared<BlowflySimulator>(b);
  }
  throw ConfigError("unknown simulator '" + s.name + "' (expected bernoulli, exponential, blowfly or linear_gaussian)",
                    "simulator.name");
}

RunConfig to_run_config(const ExperimentConfig& c) {
  if (!c.observation.simulator.empty() && c.observation.simulator != c.simulator.name) {
    throw ConfigError("observation was made for simulator '" + c.observation.simulator + "', config uses '" +
                          c.simulator.name + "'",
                      "observation.simulator");
  }
  RunConfig r;
  r.name = c.name;
  r.problem.simulator = make_simulator(c);
  r.problem.observation = c.observation;
  r.problem.prior = c.prior;
  r.problem.epsilon = c.epsilon;
  r.problem.samples = c.samples;
  r.problem.simulations = c.simulations;
  r.problem.kl_samples = c.kl_samples;
  r.init = VariationalFamily::from_constrained(c.family, c.family_params);
  r.random_init = c.random_init;
  r.estimator = c.estimator;
  r.latent_samples = c.latent_samples;
  r.optimizer = c.optimizer;
  r.max_iters = c.max_iters;
  r.convergence = c.convergence;
  r.stop_on_convergence = c.stop_on_convergence;
  r.seed = c.seed;
  r.cv_window = c.cv_window;
  r.max_consecutive_failures = c.max_consecutive_failures;
  r.reinitialize_on_failure = c.reinitialize_on_failure;
  r.validate();
  return r;
}

}  // namespace avabc
