#include "muxsim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace muxsim {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed, const std::string& stream_name) {
  std::uint64_t tag = fnv1a(stream_name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(tag >> 32)};
  engine_.seed(seq);
}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform01() {
  // Top 53 bits scaled into [0, 1).
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw std::domain_error("exponential: rate must be positive");
  double u = uniform01();
  return -std::log1p(-u) / rate;
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

double Rng::lognormal_mean(double mean, double sigma) {
  if (!(mean > 0.0)) throw std::domain_error("lognormal_mean: mean must be positive");
  if (!(sigma >= 0.0)) throw std::domain_error("lognormal_mean: sigma must be non-negative");
  // E[exp(N(mu, sigma^2))] = exp(mu + sigma^2/2) = mean.
  double mu = std::log(mean) - sigma * sigma / 2.0;
  return std::exp(normal(mu, sigma));
}

}  // namespace muxsim
