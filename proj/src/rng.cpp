#include "avabc/rng.hpp"

#include <algorithm>

namespace avabc {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Engine RngStream::substream(DrawKind kind, std::uint64_t iteration, std::uint64_t index) const {
  std::uint64_t h = splitmix64(seed_);
  h = splitmix64(h ^ static_cast<std::uint64_t>(kind));
  h = splitmix64(h ^ iteration);
  h = splitmix64(h ^ index);
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(static_cast<std::uint64_t>(kind)),
                    static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(index)};
  return Engine(seq);
}

RngStream RngStream::fork(std::uint64_t tag) const {
  return RngStream(splitmix64(splitmix64(seed_) ^ splitmix64(tag + 0x5bd1e995ULL)));
}

std::vector<double> standard_normals(Engine& eng, std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (double& x : out) x = dist(eng);
  return out;
}

std::vector<double> open_uniforms(Engine& eng, std::size_t n) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (double& x : out) x = std::clamp(dist(eng), kUniformClamp, 1.0 - kUniformClamp);
  return out;
}

}  // namespace avabc
