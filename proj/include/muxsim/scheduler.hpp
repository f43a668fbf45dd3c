#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "muxsim/kv_manager.hpp"

namespace muxsim {

enum class JobKind { Prefill, Decode };
enum class SchedKind { Adbs, Fcfs, RoundRobin };

// One launch decision. The engine turns it into a running job by pricing it
// with the cost model and scheduling its completion event.
struct JobPlan {
  int llm = -1;              // unit-local model index
  JobKind kind = JobKind::Prefill;
  std::vector<int> members;  // unit-local request indices
  double sm_demand = 0.0;
  std::int64_t prompt_tokens = 0;  // prefill: summed prompt lengths
  double avg_context = 1.0;        // decode: mean context across members
};

struct UnitRequest {
  std::int64_t global_id = -1;
  int llm = -1;
  double arrival_ms = 0.0;
  int prompt_len = 1;
  int output_len = 1;
  int steps_done = 0;  // decode steps completed after the prefill token
  double first_token_ms = -1.0;
  double done_ms = -1.0;
  bool finished = false;
};

// Per-model queues. `waiting` and `active` are kept in arrival order;
// `decoding` in admission order. `active` spans every unfinished request of
// the model (finished entries are pruned lazily from the front).
struct LlmQueues {
  std::string name;
  std::deque<int> waiting;
  std::deque<int> active;
  std::vector<int> decoding;
  bool prefill_running = false;
  bool decode_running = false;
};

// Shared mutable state of one unit's scheduler, owned by the engine.
struct UnitState {
  std::vector<UnitRequest> requests;
  std::vector<LlmQueues> llms;
  BlockPool* pool = nullptr;
  double free_sm = 1.0;
  int running_jobs = 0;
  int running_prefills = 0;
  bool prefill_waiting = false;
  int prefill_cursor = 0;
  int decode_cursor = 0;
  int rr_owner = 0;
  bool rr_turn_open = false;
  bool rr_turn_had_prefill = false;
};

struct SchedulerParams {
  std::int64_t token_budget = 4096;  // prompt tokens per prefill batch
  double decode_sm = 0.5;            // one decode job's SM share
  double prefill_min_sm = 0.3;       // smallest useful prefill share
  double eps = 1e-9;
};

/*
 * One scheduling pass: returns the jobs to launch right now and mutates the
 * state accordingly (admissions pop waiting requests and allocate KV,
 * launched jobs reserve SM shares and set running flags). Launch-kind
 * bookkeeping that only the engine can do - completion times, moving
 * prefilled members into `decoding` - happens at job completion.
 */
std::vector<JobPlan> schedule(SchedKind kind, UnitState& state, const SchedulerParams& params);

}  // namespace muxsim
