#pragma once

#include <string>
#include <vector>

#include "muxsim/cost_model.hpp"
#include "muxsim/sim_engine.hpp"

namespace muxsim {

// Nearest-rank percentile (p in (0,1]): sorted[ceil(p*n)-1]. Empty input is
// an error; callers guard.
double percentile(std::vector<double> values, double p);

/*
 * Latency a request would see running alone, with the whole SM budget:
 * one prefill over the prompt plus output_len-1 decode steps whose context
 * grows by one token each step. SLO thresholds are multiples of this.
 */
double slo_reference_latency_ms(const LLMSpec& spec, const LatencyProfile& prof, int tp_degree,
                                int prompt_len, int output_len);

struct MetricsLlmInput {
  std::string name;
  double rate = 0.0;
  const LLMSpec* spec = nullptr;
  int tp_degree = 1;
};

struct LlmMetrics {
  std::string name;
  double rate = 0.0;
  std::int64_t completed = 0;    // finished within the horizon
  double throughput_rps = 0.0;   // completed / horizon
  double mean_ttft_s = 0.0;
  double p99_ttft_s = 0.0;
  double mean_tpot_s = 0.0;  // over requests with more than one output token
  double p99_tpot_s = 0.0;
  double mean_latency_s = 0.0;  // end-to-end latency per output token
  double p99_latency_s = 0.0;
  std::vector<double> slo_attainment;  // aligned with slo_scales
};

struct MetricsReport {
  double horizon_s = 0.0;
  std::vector<double> slo_scales;
  std::vector<LlmMetrics> llms;
  // Rate-weighted sum of per-model request throughputs.
  double aggregated_throughput_rps = 0.0;
  std::vector<double> overall_slo;  // over all requests, aligned with slo_scales
};

/*
 * Fold records into per-model and aggregate serving metrics. A request meets
 * the SLO at scale s when its end-to-end latency is at most s times its
 * unloaded reference latency. With slo_reference_tp_one the reference ignores
 * the deployed tensor-parallel degree and uses a single-GPU baseline.
 */
MetricsReport compute_metrics(const std::vector<RequestRecord>& records,
                              const std::vector<MetricsLlmInput>& llms, double horizon_s,
                              const std::vector<double>& slo_scales, const LatencyProfile& prof,
                              bool slo_reference_tp_one);

// Largest pairwise difference in normalised cache usage across models with
// nonzero rates, over every unit.
double max_resource_gap(const std::vector<UnitStats>& units);

// Stable-key JSON for metrics.json; includes per-unit pool statistics.
std::string report_to_json(const MetricsReport& report, const std::vector<UnitStats>& units);

}  // namespace muxsim
