#include "muxsim/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace muxsim {

double LLMSpec::kv_bytes_per_token() const {
  return 2.0 * num_layers * num_heads * head_dim * bytes_per_element;
}

void LLMSpec::validate() const {
  if (name.empty()) throw std::invalid_argument("llm spec: name must not be empty");
  if (num_layers <= 0 || num_heads <= 0 || head_dim <= 0 || hidden_size <= 0 ||
      weight_bytes <= 0 || bytes_per_element <= 0)
    throw std::invalid_argument("llm spec '" + name + "': all sizes must be positive");
}

void ExecConfig::validate() const {
  if (tp_degree != 1 && tp_degree != 2 && tp_degree != 4 && tp_degree != 8)
    throw std::domain_error("exec config: tp_degree must be one of {1,2,4,8}");
  if (!(sm_fraction > 0.0) || sm_fraction > 1.0)
    throw std::domain_error("exec config: sm_fraction must be in (0,1]");
}

double LatencyProfile::model_scale(const LLMSpec& spec) const {
  return static_cast<double>(spec.num_layers) * spec.hidden_size / reference_scale;
}

double LatencyProfile::prefill_coef(const LLMSpec& spec) const {
  return prefill_ms_per_token * model_scale(spec);
}

double LatencyProfile::decode_base(const LLMSpec& spec) const {
  return decode_base_ms * model_scale(spec);
}

double LatencyProfile::decode_ctx_coef(const LLMSpec& spec) const {
  return decode_ctx_ms_per_token * model_scale(spec);
}

double LatencyProfile::tp_speedup(int tp_degree) const {
  if (tp_degree != 1 && tp_degree != 2 && tp_degree != 4 && tp_degree != 8)
    throw std::domain_error("tp_speedup: tp_degree must be one of {1,2,4,8}");
  return tp_degree == 1 ? 1.0 : tp_efficiency * tp_degree;
}

void LatencyProfile::validate() const {
  if (!(prefill_ms_per_token > 0.0) || !(decode_base_ms > 0.0) || !(decode_ctx_ms_per_token >= 0.0))
    throw std::invalid_argument("latency profile: coefficients must be positive");
  if (!(tp_efficiency > 0.5) || tp_efficiency > 1.0)
    throw std::invalid_argument("latency profile: tp_efficiency must be in (0.5, 1]");
  if (!(sm_saturation_point > 0.0) || sm_saturation_point > 1.0)
    throw std::invalid_argument("latency profile: sm_saturation_point must be in (0, 1]");
  if (!(batch_knee >= 1.0)) throw std::invalid_argument("latency profile: batch_knee must be >= 1");
  if (!(reference_scale > 0.0))
    throw std::invalid_argument("latency profile: reference_scale must be positive");
}

double sm_scaling_prefill(double f) {
  if (!(f > 0.0) || f > 1.0) throw std::domain_error("sm_scaling_prefill: f must be in (0,1]");
  // Compute bound: latency is inverse in the SM share.
  return 1.0 / f;
}

double sm_scaling_decode(double f, double f_sat) {
  if (!(f > 0.0) || f > 1.0) throw std::domain_error("sm_scaling_decode: f must be in (0,1]");
  if (!(f_sat > 0.0) || f_sat > 1.0)
    throw std::domain_error("sm_scaling_decode: f_sat must be in (0,1]");
  // Memory bound: flat down to the saturation share, inverse below it.
  return f >= f_sat ? 1.0 : 1.0 / f;
}

double prefill_latency(const LLMSpec& spec, const LatencyProfile& prof, const ExecConfig& cfg,
                       int batch, std::int64_t total_prompt_tokens) {
  cfg.validate();
  if (batch < 1) throw std::domain_error("prefill_latency: batch must be >= 1");
  if (total_prompt_tokens < batch)
    throw std::domain_error("prefill_latency: total_prompt_tokens must be >= batch");
  return prof.prefill_coef(spec) * static_cast<double>(total_prompt_tokens) *
         sm_scaling_prefill(cfg.sm_fraction) / prof.tp_speedup(cfg.tp_degree);
}

double decode_step_latency(const LLMSpec& spec, const LatencyProfile& prof, const ExecConfig& cfg,
                           int batch, double avg_context) {
  cfg.validate();
  if (batch < 1) throw std::domain_error("decode_step_latency: batch must be >= 1");
  if (!(avg_context >= 1.0)) throw std::domain_error("decode_step_latency: avg_context must be >= 1");
  double batch_growth = std::max(1.0, batch / prof.batch_knee);
  return (prof.decode_base(spec) + prof.decode_ctx_coef(spec) * avg_context) * batch_growth *
         sm_scaling_decode(cfg.sm_fraction, prof.sm_saturation_point) /
         prof.tp_speedup(cfg.tp_degree);
}

double stable_batch_throughput(double total_prefill_ms, double decode_step_ms, double gen_len,
                               int batch, double rate_cap) {
  if (batch < 1) throw std::domain_error("stable_batch_throughput: batch must be >= 1");
  if (!(gen_len >= 1.0)) throw std::domain_error("stable_batch_throughput: gen_len must be >= 1");
  if (!(total_prefill_ms >= 0.0) || !(decode_step_ms > 0.0))
    throw std::domain_error("stable_batch_throughput: latencies must be positive");
  double cycle_ms = total_prefill_ms + decode_step_ms * gen_len;
  return std::min(1000.0 * batch / cycle_ms, rate_cap);
}

namespace {

// Unclamped cycle throughput at a given batch. Strictly increasing in batch:
// the cycle is (a*b + P + D*max(1, b/knee)*gen) for constants a, P, D > 0, so
// b / cycle(b) grows with b.
double raw_cycle_throughput(const LLMSpec& spec, const LatencyProfile& prof, const ExecConfig& cfg,
                            const std::vector<PeerLoad>& peers, double mean_prompt_tokens,
                            double gen_len, int batch) {
  std::int64_t own_tokens =
      std::max<std::int64_t>(batch, llround(batch * mean_prompt_tokens));
  double prefill = prefill_latency(spec, prof, cfg, batch, own_tokens);
  for (const PeerLoad& peer : peers) {
    std::int64_t peer_tokens =
        std::max<std::int64_t>(peer.batch, llround(peer.batch * peer.mean_prompt_tokens));
    prefill += prefill_latency(*peer.spec, prof, peer.exec, peer.batch, peer_tokens);
  }
  double avg_context = std::max(1.0, mean_prompt_tokens + gen_len / 2.0);
  double step = decode_step_latency(spec, prof, cfg, batch, avg_context);
  double cycle_ms = prefill + step * gen_len;
  return 1000.0 * batch / cycle_ms;
}

}  // namespace

ThroughputEstimate estimate_throughput(const LLMSpec& spec, const LatencyProfile& prof,
                                       double num_sm, int tp, double workload_rate,
                                       const std::vector<PeerLoad>& peers,
                                       double mean_prompt_tokens, double gen_len, int max_batch) {
  spec.validate();
  prof.validate();
  if (!(workload_rate > 0.0))
    throw std::domain_error("estimate_throughput: workload_rate must be positive");
  if (!(mean_prompt_tokens >= 1.0))
    throw std::domain_error("estimate_throughput: mean_prompt_tokens must be >= 1");
  if (!(gen_len >= 1.0)) throw std::domain_error("estimate_throughput: gen_len must be >= 1");
  if (max_batch < 1) throw std::domain_error("estimate_throughput: max_batch must be >= 1");
  ExecConfig cfg{tp, num_sm};
  cfg.validate();

  auto raw = [&](int b) {
    return raw_cycle_throughput(spec, prof, cfg, peers, mean_prompt_tokens, gen_len, b);
  };

  double top = raw(max_batch);
  if (top < workload_rate) {
    // Saturated: report capacity, backing the batch off to the smallest one
    // within 1% of the max-batch rate so memory demand stays honest.
    double target = 0.99 * top;
    int lo = 1, hi = max_batch;
    while (lo < hi) {
      int mid = lo + (hi - lo) / 2;
      if (raw(mid) >= target)
        hi = mid;
      else
        lo = mid + 1;
    }
    return {raw(lo), lo, true};
  }

  int lo = 1, hi = max_batch;
  while (lo < hi) {
    int mid = lo + (hi - lo) / 2;
    if (raw(mid) >= workload_rate)
      hi = mid;
    else
      lo = mid + 1;
  }
  return {workload_rate, lo, false};
}

}  // namespace muxsim
