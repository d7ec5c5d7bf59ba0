// Writes a synthetic blowfly observation file from known parameters.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "avabc/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic blowfly observation"};
  std::vector<double> theta{2.0, -1.8, 6.0, -0.75, -0.5};
  std::uint64_t seed = 20160501;
  std::string out = "blowfly_observation.json";
  avabc::SimulatorSpec spec;
  spec.name = "blowfly";
  app.add_option("--theta", theta, "theta* = (log P, log delta, log N0, log sigma_d, log sigma_p)")->expected(5);
  app.add_option("--seed", seed, "Noise seed");
  app.add_option("--horizon", spec.horizon, "Series length T");
  app.add_option("--lag", spec.lag, "Delay tau");
  app.add_option("--initial-population", spec.initial_population, "History value for t <= tau");
  app.add_option("--out", out, "Output path");
  CLI11_PARSE(app, argc, argv);
  try {
    const auto obs = avabc::synthesize_blowfly_observation(spec, theta, seed);
    avabc::save_observation(obs, out);
    std::cout << "wrote " << out << " (" << obs.raw.size() << " days, statistics";
    for (double s : obs.statistics) std::cout << ' ' << s;
    std::cout << ")\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
