#pragma once

#include <cstdint>
#include <string>

#include <random>

namespace muxsim {

// Deterministic random stream. Each consumer owns a named substream derived
// from (seed, name), so adding or removing one consumer never perturbs the
// draws seen by any other.
class Rng {
 public:
  Rng(std::uint64_t seed, const std::string& stream_name);

  std::uint64_t next_u64();

  // Uniform draw in [0, 1) with 53 bits of mantissa.
  double uniform01();

  // Exponential with the given rate (events per unit time); rate > 0.
  double exponential(double rate);

  // Standard Box-Muller with spare caching.
  double normal(double mean, double stddev);

  // Lognormal parameterised by the distribution mean (not mu); sigma is the
  // shape parameter of the underlying normal.
  double lognormal_mean(double mean, double sigma);

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// FNV-1a, used to fold stream names into seed material.
std::uint64_t fnv1a(const std::string& s);

}  // namespace muxsim
