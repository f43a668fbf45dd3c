#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "muxsim/cost_model.hpp"
#include "muxsim/kv_manager.hpp"
#include "muxsim/placement.hpp"
#include "muxsim/scheduler.hpp"
#include "muxsim/workload.hpp"

namespace muxsim {

struct EngineParams {
  SchedKind scheduler = SchedKind::Adbs;
  double kappa = 0.1;  // colocation slowdown per unit of foreign SM share
  double quota_period_s = 10.0;
  std::int64_t token_budget = 4096;
  int block_tokens = 16;
  double warmup_s = 0.0;  // usage statistics ignore this leading window
  double decode_sm = 0.5;
  double prefill_min_sm = 0.3;
  double activation_reserve_frac = 0.1;
  double quota_floor_frac = 0.02;
  QuotaAdaptParams adapt;
  double eps = 1e-9;
};

struct RequestRecord {
  std::int64_t id = -1;
  std::string llm;
  double arrival_s = 0.0;
  double first_token_s = 0.0;
  double done_s = 0.0;
  int prompt_len = 1;
  int output_len = 1;
};

// One point of the per-model pool time series, sampled at quota ticks.
struct PoolSample {
  double t_s = 0.0;
  std::string llm;
  std::int64_t used_blocks = 0;
  std::int64_t quota_blocks = 0;
};

struct UnitLlmStats {
  std::string llm;
  double rate = 0.0;
  double avg_used_blocks = 0.0;  // time-averaged over the post-warmup window
  std::int64_t final_quota_blocks = 0;
  // Normalised token-block usage: avg_used / (rate * blocks_per_token *
  // mean_request_tokens). Zero-rate models report 0 and stay out of
  // pairwise fairness comparisons.
  double resource_usage = 0.0;
};

struct UnitStats {
  int unit = 0;
  std::int64_t total_blocks = 0;
  std::vector<UnitLlmStats> llms;
  std::vector<PoolSample> samples;
};

struct SimResult {
  std::vector<RequestRecord> records;  // sorted by request id
  std::vector<UnitStats> units;        // one per non-empty unit, by unit index
};

// Duration multiplier for a job sharing its GPUs with other jobs.
double interference_adjust(double total_running_sm, double own_sm, double kappa);

/*
 * Deterministic discrete-event run of one placement against a trace. Units
 * share nothing and are simulated independently; within a unit, events are
 * ordered by (time, kind: completions < arrivals < quota ticks, sequence
 * number) and every event triggers one scheduling pass. Requests run to
 * completion, so every trace row yields one record.
 */
SimResult run_simulation(const Cluster& cluster, const PlacementResult& placement,
                         const std::vector<LlmEntry>& entries, const std::vector<Request>& trace,
                         const LatencyProfile& prof, const EngineParams& params);

}  // namespace muxsim
