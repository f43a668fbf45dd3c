#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "muxsim/rng.hpp"

namespace muxsim {

// Request length distribution: constant, lognormal fitted by mean, or an
// empirical histogram. Samples are integer token counts >= 1.
class LengthDist {
 public:
  struct Constant {
    double value = 1.0;
  };
  struct Lognormal {
    double mean = 1.0;
    double sigma = 0.8;
  };
  struct Empirical {
    std::vector<double> values;
    std::vector<double> weights;
  };

  LengthDist() : dist_(Constant{1.0}) {}

  static LengthDist constant(double value);
  static LengthDist lognormal(double mean, double sigma = 0.8);
  static LengthDist empirical(std::vector<double> values, std::vector<double> weights);

  int sample(Rng& rng) const;
  double mean() const;

  bool is_constant() const { return std::holds_alternative<Constant>(dist_); }
  bool is_lognormal() const { return std::holds_alternative<Lognormal>(dist_); }
  bool is_empirical() const { return std::holds_alternative<Empirical>(dist_); }
  const Constant& as_constant() const { return std::get<Constant>(dist_); }
  const Lognormal& as_lognormal() const { return std::get<Lognormal>(dist_); }
  const Empirical& as_empirical() const { return std::get<Empirical>(dist_); }

 private:
  std::variant<Constant, Lognormal, Empirical> dist_;
};

struct LlmWorkload {
  std::string llm;
  double rate = 0.0;  // mean arrivals per second; 0 means no traffic
  LengthDist prompt_len;
  LengthDist output_len;
};

struct WorkloadSpec {
  std::vector<LlmWorkload> llms;
  double horizon_s = 0.0;
  std::uint64_t seed = 0;
};

struct Request {
  std::int64_t id = 0;
  std::string llm;
  double arrival_s = 0.0;
  int prompt_len = 1;
  int output_len = 1;
};

/*
 * Power-law popularity: rate_i = max_rate * i^(-alpha) for ranks i = 1..n.
 * alpha = 0 gives a uniform spread; larger alpha concentrates traffic on the
 * top-ranked models.
 */
std::vector<double> gen_rates(int n_llms, double alpha, double max_rate);

// Fraction of total rate carried by the busiest ceil-rounded `fraction` of
// models (at least one).
double top_share(const std::vector<double>& rates, double fraction = 0.2);

// Poisson arrival times within [0, horizon): exponential gaps at `rate`.
// rate = 0 yields no arrivals.
std::vector<double> gen_arrivals(double rate, double horizon_s, Rng& rng);

// Full trace: per-model substreams for arrivals and lengths, merged in
// arrival order (ties broken by model name) and numbered from zero.
std::vector<Request> gen_workload(const WorkloadSpec& spec);

// CSV trace with header id,llm,arrival_s,prompt_len,output_len. Arrivals are
// written with %.17g so a save/load round trip is exact.
void save_trace(const std::vector<Request>& trace, const std::string& path);
std::vector<Request> load_trace(const std::string& path);

}  // namespace muxsim
