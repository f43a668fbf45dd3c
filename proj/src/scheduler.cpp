#include "muxsim/scheduler.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace muxsim {

namespace {

constexpr std::int64_t kNoBound = std::numeric_limits<std::int64_t>::max();

// Policy-shaped view of one pass: which models may prefill, which may launch
// decode rounds, and the admission cutoff (requests with global id >= the
// bound stay queued, which is how FCFS keeps admissions in arrival order).
struct CoreInput {
  std::vector<int> prefill_order;
  std::vector<int> decode_order;
  std::int64_t admit_bound_id = kNoBound;
};

bool eligible_decode_work(const UnitState& s, const std::vector<int>& decode_order) {
  for (int li : decode_order) {
    const LlmQueues& q = s.llms[li];
    if (!q.decoding.empty() && !q.decode_running) return true;
  }
  return false;
}

/*
 * The prefill-priority pass shared by every policy. Phase 1: when no prefill
 * runs, walk prefill_order and launch a prefill batch for the first model
 * whose front request can be admitted; a model blocked on memory passes the
 * turn to the next, but an SM shortage blocks every candidate alike. While
 * no prefill could launch, prefill_waiting suppresses phase 2. Phase 2:
 * launch one decode round per model in decode_order while SM shares remain.
 * A blocked prefill on a fully idle unit falls through to decodes so
 * completions can free the memory it is waiting for.
 */
std::vector<JobPlan> core_pass(UnitState& s, const SchedulerParams& p, const CoreInput& in) {
  std::vector<JobPlan> plans;
  int n = static_cast<int>(s.llms.size());
  bool launched_prefill = false;

  if (s.running_prefills == 0) {
    s.prefill_waiting = false;
    bool has_candidate = false;
    // Prefill takes the residual capacity, leaving one decode share when
    // decode work could colocate, and never runs below its minimum share.
    double demand = eligible_decode_work(s, in.decode_order)
                        ? std::min(s.free_sm, 1.0 - p.decode_sm)
                        : s.free_sm;
    demand = std::max(p.prefill_min_sm, demand);
    bool sm_ok = demand <= s.free_sm + p.eps;
    for (int li : in.prefill_order) {
      LlmQueues& q = s.llms[li];
      if (q.waiting.empty()) continue;
      if (s.requests[q.waiting.front()].global_id >= in.admit_bound_id) continue;
      has_candidate = true;
      if (!sm_ok) break;
      JobPlan plan;
      plan.llm = li;
      plan.kind = JobKind::Prefill;
      plan.sm_demand = demand;
      while (!q.waiting.empty()) {
        int rid = q.waiting.front();
        const UnitRequest& r = s.requests[rid];
        if (r.global_id >= in.admit_bound_id) break;
        if (!plan.members.empty() && plan.prompt_tokens + r.prompt_len > p.token_budget) break;
        // Admission reserves the request's final footprint (prompt plus
        // every token it will generate), so decode growth is pre-paid.
        if (!s.pool->admit(li, rid, r.prompt_len, r.prompt_len + r.output_len - 1).ok) break;
        plan.members.push_back(rid);
        plan.prompt_tokens += r.prompt_len;
        q.waiting.pop_front();
      }
      if (plan.members.empty()) continue;  // memory-blocked: the turn passes on
      q.prefill_running = true;
      s.running_prefills += 1;
      s.running_jobs += 1;
      s.free_sm -= plan.sm_demand;
      s.prefill_cursor = (li + 1) % n;
      launched_prefill = true;
      plans.push_back(std::move(plan));
      break;
    }
    s.prefill_waiting = has_candidate && !launched_prefill;
  }

  bool idle_escape = s.prefill_waiting && s.running_jobs == 0 && !launched_prefill;
  if (!s.prefill_waiting || idle_escape) {
    for (int li : in.decode_order) {
      LlmQueues& q = s.llms[li];
      if (q.decoding.empty() || q.decode_running) continue;
      if (p.decode_sm > s.free_sm + p.eps) continue;
      JobPlan plan;
      plan.llm = li;
      plan.kind = JobKind::Decode;
      plan.sm_demand = p.decode_sm;
      double ctx_sum = 0.0;
      for (int rid : q.decoding) {
        const UnitRequest& r = s.requests[rid];
        // Each step appends one token's cache; a full pool skips the member
        // for this round rather than evicting anyone.
        if (!s.pool->alloc(li, rid, 1, false).ok) continue;
        plan.members.push_back(rid);
        ctx_sum += r.prompt_len + 1 + r.steps_done;
      }
      if (plan.members.empty()) continue;
      plan.avg_context = ctx_sum / static_cast<double>(plan.members.size());
      q.decode_running = true;
      s.running_jobs += 1;
      s.free_sm -= p.decode_sm;
      s.decode_cursor = (li + 1) % n;
      plans.push_back(std::move(plan));
    }
  }
  return plans;
}

std::vector<JobPlan> schedule_adbs(UnitState& s, const SchedulerParams& p) {
  int n = static_cast<int>(s.llms.size());
  CoreInput in;
  for (int k = 0; k < n; ++k) in.prefill_order.push_back((s.prefill_cursor + k) % n);
  for (int k = 0; k < n; ++k) in.decode_order.push_back((s.decode_cursor + k) % n);
  return core_pass(s, p, in);
}

void prune_finished(UnitState& s, std::deque<int>& dq) {
  while (!dq.empty() && s.requests[dq.front()].finished) dq.pop_front();
}

int running_llm(const UnitState& s) {
  for (int i = 0; i < static_cast<int>(s.llms.size()); ++i)
    if (s.llms[i].prefill_running || s.llms[i].decode_running) return i;
  return -1;
}

// Model owning the earliest waiting request, by global id.
int oldest_waiting_llm(const UnitState& s) {
  std::int64_t best = kNoBound;
  int who = -1;
  for (int i = 0; i < static_cast<int>(s.llms.size()); ++i) {
    const LlmQueues& q = s.llms[i];
    if (q.waiting.empty()) continue;
    std::int64_t id = s.requests[q.waiting.front()].global_id;
    if (id < best) {
      best = id;
      who = i;
    }
  }
  return who;
}

// Model owning the earliest unfinished request.
int oldest_outstanding_llm(UnitState& s) {
  std::int64_t best = kNoBound;
  int who = -1;
  for (int i = 0; i < static_cast<int>(s.llms.size()); ++i) {
    LlmQueues& q = s.llms[i];
    prune_finished(s, q.active);
    if (q.active.empty()) continue;
    std::int64_t id = s.requests[q.active.front()].global_id;
    if (id < best) {
      best = id;
      who = i;
    }
  }
  return who;
}

/*
 * FCFS: the model owning the globally earliest waiting request is the only
 * one allowed to prefill, with continuous batching across its own queue. The
 * mesh is held temporally: while one model's jobs run, only that model may
 * launch anything, and when the unit idles the model of the oldest
 * outstanding request resumes first (admitted batches run to completion).
 */
std::vector<JobPlan> schedule_fcfs(UnitState& s, const SchedulerParams& p) {
  int target = running_llm(s);
  if (target < 0) target = oldest_outstanding_llm(s);
  if (target < 0) return {};
  CoreInput in;
  if (oldest_waiting_llm(s) == target) in.prefill_order.push_back(target);
  in.decode_order.push_back(target);
  return core_pass(s, p, in);
}

/*
 * Round-Robin: models take turns holding the whole mesh. A turn is one
 * prefill batch (plus the owner's own decode rounds colocated under it) or,
 * with nothing to prefill, a single decode round. The next owner starts only
 * after the previous owner's jobs drain, so models never share the mesh.
 */
std::vector<JobPlan> schedule_rr(UnitState& s, const SchedulerParams& p) {
  int n = static_cast<int>(s.llms.size());
  auto has_work = [&](int li) {
    return !s.llms[li].waiting.empty() || !s.llms[li].decoding.empty();
  };
  auto next_with_work = [&](int from) {
    for (int k = 1; k <= n; ++k) {
      int c = (from + k) % n;
      if (has_work(c)) return c;
    }
    return from;
  };

  bool turn_done = s.rr_turn_open &&
                   ((s.rr_turn_had_prefill && s.running_prefills == 0) ||
                    (!s.rr_turn_had_prefill && s.running_jobs == 0));
  if (turn_done) {
    s.rr_owner = next_with_work(s.rr_owner);
    s.rr_turn_open = false;
    s.rr_turn_had_prefill = false;
  }
  if (!s.rr_turn_open && !has_work(s.rr_owner)) s.rr_owner = next_with_work(s.rr_owner);

  for (int i = 0; i < n; ++i)
    if (i != s.rr_owner && (s.llms[i].prefill_running || s.llms[i].decode_running)) return {};

  // An owner that cannot launch anything on an idle mesh (admission blocked
  // on memory, say) yields its turn, because only another model's completions
  // can unblock it.
  for (int tries = 0; tries < n; ++tries) {
    CoreInput in;
    in.prefill_order.push_back(s.rr_owner);
    in.decode_order.push_back(s.rr_owner);
    std::vector<JobPlan> plans = core_pass(s, p, in);
    for (const JobPlan& plan : plans) {
      if (plan.kind == JobKind::Prefill) {
        s.rr_turn_open = true;
        s.rr_turn_had_prefill = true;
      } else if (!s.rr_turn_open) {
        s.rr_turn_open = true;
      }
    }
    if (!plans.empty()) return plans;
    if (s.running_jobs != 0) break;
    int next = next_with_work(s.rr_owner);
    if (next == s.rr_owner) break;
    s.rr_owner = next;
  }
  return {};
}

}  // namespace

std::vector<JobPlan> schedule(SchedKind kind, UnitState& state, const SchedulerParams& params) {
  if (state.pool == nullptr) throw std::logic_error("scheduler: unit state has no block pool");
  switch (kind) {
    case SchedKind::Adbs:
      return schedule_adbs(state, params);
    case SchedKind::Fcfs:
      return schedule_fcfs(state, params);
    case SchedKind::RoundRobin:
      return schedule_rr(state, params);
  }
  throw std::logic_error("scheduler: unknown policy");
}

}  // namespace muxsim
