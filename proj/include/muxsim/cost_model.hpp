#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace muxsim {

// Architecture and memory footprint of one model.
struct LLMSpec {
  std::string name;
  int num_layers = 0;
  int num_heads = 0;
  int head_dim = 128;
  int hidden_size = 0;
  std::int64_t weight_bytes = 0;
  int bytes_per_element = 2;

  // K and V for every (layer, head) slot of one token.
  double kv_bytes_per_token() const;
  void validate() const;
};

// How a job runs: tensor-parallel width and the SM share granted per GPU.
struct ExecConfig {
  int tp_degree = 1;
  double sm_fraction = 1.0;
  void validate() const;
};

// Parametric latency model. Coefficients describe the reference model and
// scale linearly with num_layers * hidden_size.
struct LatencyProfile {
  double prefill_ms_per_token = 0.25;
  double decode_base_ms = 12.0;
  double decode_ctx_ms_per_token = 0.005;
  double tp_efficiency = 0.9;        // eta, in (0.5, 1]
  double sm_saturation_point = 0.5;  // f_sat, decode is flat above this share
  double batch_knee = 16.0;          // decode step grows linearly past this batch
  double reference_scale = 32.0 * 4096.0;

  double model_scale(const LLMSpec& spec) const;
  double prefill_coef(const LLMSpec& spec) const;
  double decode_base(const LLMSpec& spec) const;
  double decode_ctx_coef(const LLMSpec& spec) const;

  // One GPU pays no partition overhead; wider meshes scale by eta * tp.
  double tp_speedup(int tp_degree) const;
  void validate() const;
};

// Latency multipliers for partial-SM execution. f must lie in (0, 1].
double sm_scaling_prefill(double f);
double sm_scaling_decode(double f, double f_sat);

/*
 * Prefill is compute bound:
 *
 *   t_p = c_p(spec) * total_prompt_tokens * sm_scaling_prefill(f) / speedup(tp)
 *
 * batch >= 1 and total_prompt_tokens >= batch; result in milliseconds.
 */
double prefill_latency(const LLMSpec& spec, const LatencyProfile& prof, const ExecConfig& cfg,
                       int batch, std::int64_t total_prompt_tokens);

/*
 * One decode iteration over a running batch is memory bound:
 *
 *   t_d = (c_d(spec) + c_ctx(spec) * avg_context)
 *         * max(1, batch / batch_knee) * sm_scaling_decode(f) / speedup(tp)
 *
 * batch >= 1 and avg_context >= 1; result in milliseconds.
 */
double decode_step_latency(const LLMSpec& spec, const LatencyProfile& prof, const ExecConfig& cfg,
                           int batch, double avg_context);

// One colocated model's recurring prefill load, as seen from a throughput
// estimate: its stable batch re-prefills once per cycle.
struct PeerLoad {
  const LLMSpec* spec = nullptr;
  ExecConfig exec;
  int batch = 1;
  double mean_prompt_tokens = 1.0;
};

struct ThroughputEstimate {
  double throughput = 0.0;  // req/s, never above the workload rate
  int batch = 0;
  bool saturated = false;   // no batch met the rate; fields hold the capacity point
};

/*
 * Steady-state throughput of one stable batch cycle:
 *
 *   tpt = min( batch / (total_prefill + decode_step * gen_len), rate_cap )
 *
 * with latencies in milliseconds and the result in requests per second.
 */
double stable_batch_throughput(double total_prefill_ms, double decode_step_ms, double gen_len,
                               int batch, double rate_cap);

// Smallest batch whose cycle throughput meets workload_rate (binary search;
// the cycle rate is strictly increasing in batch). When even max_batch falls
// short, returns the capacity point flagged saturated, with batch backed off
// to the smallest one within 1% of the max-batch rate.
ThroughputEstimate estimate_throughput(const LLMSpec& spec, const LatencyProfile& prof,
                                       double num_sm, int tp, double workload_rate,
                                       const std::vector<PeerLoad>& peers,
                                       double mean_prompt_tokens, double gen_len, int max_batch);

}  // namespace muxsim
