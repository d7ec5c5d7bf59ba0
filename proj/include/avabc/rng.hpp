#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace avabc {

using Engine = std::mt19937_64;

/// What a substream is used for. Part of the substream key so that, e.g.,
/// the variational base draws of sample s never alias the simulator noise of
/// simulation s.
enum class DrawKind : std::uint64_t {
  kVariational = 1,  // nu ~ Q0
  kSimulatorNoise = 2,  // u ~ p(u)
  kKlDivergence = 3,  // Monte-Carlo KL base draws
  kLatent = 4,  // w ~ Q0 for latent variables
  kInit = 5,  // random initialization of phi
  kObservation = 6,  // synthetic observations
  kReplicate = 7,  // post-hoc re-simulation (plot data)
};

/// Clamp applied to uniform base draws so inverse CDFs never see 0 or 1.
inline constexpr double kUniformClamp = 1e-12;

/// Hierarchical, counter-keyed random streams. A substream is fully
/// determined by (seed, kind, iteration, index), so draws are reproducible
/// regardless of evaluation order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Engine substream(DrawKind kind, std::uint64_t iteration, std::uint64_t index) const;

  /// Independent stream family for a different purpose (e.g. variance
  /// profiling) that must not collide with the run's own draws.
  RngStream fork(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
};

std::uint64_t splitmix64(std::uint64_t x);

std::vector<double> standard_normals(Engine& eng, std::size_t n);
/// Uniform(0,1) draws clamped to [kUniformClamp, 1 - kUniformClamp].
std::vector<double> open_uniforms(Engine& eng, std::size_t n);

}  // namespace avabc
