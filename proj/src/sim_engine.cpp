#include "muxsim/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "muxsim/log.hpp"

namespace muxsim {

double interference_adjust(double total_running_sm, double own_sm, double kappa) {
  return 1.0 + kappa * std::max(0.0, total_running_sm - own_sm);
}

namespace {

enum EventKind { kJobDone = 0, kArrival = 1, kQuotaTick = 2 };

struct RunningJob {
  int llm = -1;
  JobKind kind = JobKind::Prefill;
  std::vector<int> members;
  double sm = 0.0;
};

struct Event {
  double t_ms = 0.0;
  int kind = kArrival;
  std::int64_t seq = 0;
  std::int64_t payload = 0;  // job id or trace row index

  bool operator>(const Event& o) const {
    if (t_ms != o.t_ms) return t_ms > o.t_ms;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

struct LlmUsageAccum {
  double tick_block_ms = 0.0;   // integral of used blocks over the tick window
  double stats_block_ms = 0.0;  // same, clipped to the post-warmup window
};

const char* kind_name(JobKind k) { return k == JobKind::Prefill ? "prefill" : "decode"; }

// One unit's whole simulation: queues, pool, event heap, usage accounting.
class UnitSim {
 public:
  UnitSim(int unit_index, const LLMUnit& unit, const std::vector<LlmEntry>& entries,
          const Cluster& cluster, const LatencyProfile& prof, const EngineParams& params)
      : unit_index_(unit_index),
        tp_(unit.mesh.size()),
        prof_(prof),
        params_(params),
        pool_(pool_blocks(unit, entries, cluster, params)) {
    sparams_.token_budget = params.token_budget;
    sparams_.decode_sm = params.decode_sm;
    sparams_.prefill_min_sm = params.prefill_min_sm;
    sparams_.eps = params.eps;

    state_.pool = &pool_;
    for (const PlacedLlm& p : unit.llms) {
      const LlmEntry& e = entries[p.llm];
      LlmQueues q;
      q.name = e.spec.name;
      state_.llms.push_back(std::move(q));
      specs_.push_back(&entries[p.llm].spec);
      entry_idx_.push_back(p.llm);
      pool_.register_llm(static_cast<int>(specs_.size()) - 1, specs_.back(),
                         params.block_tokens);
    }
    init_quotas(entries);
    usage_.resize(specs_.size());
  }

  int find_llm(const std::string& name) const {
    for (size_t i = 0; i < state_.llms.size(); ++i)
      if (state_.llms[i].name == name) return static_cast<int>(i);
    return -1;
  }

  void add_trace_row(const Request& r, int llm) {
    std::int64_t max_tokens = r.prompt_len + r.output_len - 1;
    if (blocks_for_tokens(*specs_[llm], params_.block_tokens, max_tokens) > pool_.total_blocks()) {
      std::ostringstream os;
      os << "request " << r.id << " needs more kv blocks than unit " << unit_index_
         << " holds in total";
      throw std::invalid_argument(os.str());
    }
    trace_.push_back(r);
    trace_llm_.push_back(llm);
  }

  void run() {
    if (trace_.empty()) return;
    for (size_t i = 0; i < trace_.size(); ++i)
      push_event(trace_[i].arrival_s * 1000.0, kArrival, static_cast<std::int64_t>(i));
    double period_ms = params_.quota_period_s * 1000.0;
    push_event(period_ms, kQuotaTick, 0);

    while (!events_.empty()) {
      Event ev = events_.top();
      events_.pop();
      if (ev.kind == kQuotaTick && finished_ == static_cast<std::int64_t>(trace_.size()))
        continue;
      integrate_usage(ev.t_ms);
      now_ = ev.t_ms;
      switch (ev.kind) {
        case kJobDone:
          complete_job(ev.payload);
          break;
        case kArrival:
          admit_arrival(ev.payload);
          break;
        case kQuotaTick:
          quota_tick(period_ms);
          break;
      }
      std::vector<JobPlan> plans = schedule(params_.scheduler, state_, sparams_);
      for (JobPlan& plan : plans) launch(std::move(plan));
      if (state_.free_sm < -1e-9 || state_.free_sm > 1.0 + 1e-9)
        throw std::logic_error("sm budget violated on unit " + std::to_string(unit_index_));
      if (log_level() >= LogLevel::Debug) pool_.check_conservation();
      if (ev.kind == kQuotaTick) detect_stall(plans.empty());
    }
    if (finished_ != static_cast<std::int64_t>(trace_.size()))
      throw std::logic_error("simulation ended with unfinished requests on unit " +
                             std::to_string(unit_index_));
    pool_.check_conservation();
  }

  void collect(std::vector<RequestRecord>& records, UnitStats& stats,
               const std::vector<LlmEntry>& entries) const {
    for (size_t i = 0; i < state_.requests.size(); ++i) {
      const UnitRequest& r = state_.requests[i];
      RequestRecord rec;
      rec.id = r.global_id;
      rec.llm = state_.llms[r.llm].name;
      rec.arrival_s = r.arrival_ms / 1000.0;
      rec.first_token_s = r.first_token_ms / 1000.0;
      rec.done_s = r.done_ms / 1000.0;
      rec.prompt_len = r.prompt_len;
      rec.output_len = r.output_len;
      if (!(r.arrival_ms <= r.first_token_ms && r.first_token_ms <= r.done_ms))
        throw std::logic_error("record timestamps out of order");
      records.push_back(std::move(rec));
    }
    stats.unit = unit_index_;
    stats.total_blocks = pool_.total_blocks();
    double window_ms = now_ - params_.warmup_s * 1000.0;
    for (size_t i = 0; i < specs_.size(); ++i) {
      const LlmEntry& e = entries[entry_idx_[i]];
      UnitLlmStats ls;
      ls.llm = state_.llms[i].name;
      ls.rate = e.rate;
      ls.avg_used_blocks = window_ms > 0.0 ? usage_[i].stats_block_ms / window_ms : 0.0;
      ls.final_quota_blocks = pool_.quota(static_cast<int>(i));
      double denom = e.rate * blocks_per_token(e.spec, params_.block_tokens) *
                     (e.mean_prompt_tokens + e.mean_output_tokens);
      ls.resource_usage = denom > 0.0 ? ls.avg_used_blocks / denom : 0.0;
      stats.llms.push_back(std::move(ls));
    }
    stats.samples = samples_;
  }

 private:
  static std::int64_t pool_blocks(const LLMUnit& unit, const std::vector<LlmEntry>& entries,
                                  const Cluster& cluster, const EngineParams& params) {
    std::int64_t mesh_bytes =
        static_cast<std::int64_t>(unit.mesh.size()) * cluster.gpu_memory_bytes;
    std::int64_t weights = 0;
    for (const PlacedLlm& p : unit.llms) weights += entries[p.llm].spec.weight_bytes;
    MemoryLayout layout =
        MemoryLayout::for_mesh(mesh_bytes, weights, params.activation_reserve_frac);
    std::int64_t bytes_per_block = block_bytes(entries[unit.llms.front().llm].spec,
                                               params.block_tokens);
    for (const PlacedLlm& p : unit.llms)
      if (block_bytes(entries[p.llm].spec, params.block_tokens) != bytes_per_block)
        throw std::logic_error("colocated models disagree on kv block bytes");
    return layout.kv_bytes / bytes_per_block;
  }

  void init_quotas(const std::vector<LlmEntry>& entries) {
    int n = static_cast<int>(specs_.size());
    if (params_.scheduler == SchedKind::Adbs) {
      std::vector<QuotaInput> in;
      for (int i = 0; i < n; ++i) {
        const LlmEntry& e = entries[entry_idx_[i]];
        in.push_back({e.rate, blocks_per_token(e.spec, params_.block_tokens),
                      e.mean_prompt_tokens + e.mean_output_tokens});
      }
      std::vector<std::int64_t> quotas =
          init_token_block_quota(in, pool_.total_blocks(), params_.quota_floor_frac);
      for (int i = 0; i < n; ++i) pool_.set_quota(i, quotas[i]);
    } else {
      // Baselines run without block quotas: every model sees the whole pool.
      for (int i = 0; i < n; ++i) pool_.set_quota(i, pool_.total_blocks());
    }
    quota_floor_ = static_cast<std::int64_t>(
        std::llround(std::min(params_.quota_floor_frac, 1.0 / n) *
                     static_cast<double>(pool_.total_blocks())));
  }

  void push_event(double t_ms, int kind, std::int64_t payload) {
    events_.push({t_ms, kind, seq_++, payload});
  }

  void integrate_usage(double t_ms) {
    double warmup_ms = params_.warmup_s * 1000.0;
    for (size_t i = 0; i < usage_.size(); ++i) {
      double used = static_cast<double>(pool_.used(static_cast<int>(i)));
      usage_[i].tick_block_ms += used * (t_ms - last_integral_ms_);
      double from = std::max(last_integral_ms_, warmup_ms);
      if (t_ms > from) usage_[i].stats_block_ms += used * (t_ms - from);
    }
    last_integral_ms_ = t_ms;
  }

  void admit_arrival(std::int64_t row) {
    const Request& r = trace_[row];
    int llm = trace_llm_[row];
    UnitRequest ur;
    ur.global_id = r.id;
    ur.llm = llm;
    ur.arrival_ms = r.arrival_s * 1000.0;
    ur.prompt_len = r.prompt_len;
    ur.output_len = r.output_len;
    int rid = static_cast<int>(state_.requests.size());
    state_.requests.push_back(ur);
    state_.llms[llm].waiting.push_back(rid);
    state_.llms[llm].active.push_back(rid);
    arrived_ += 1;
  }

  void complete_job(std::int64_t job_id) {
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) throw std::logic_error("completion for unknown job");
    RunningJob job = std::move(it->second);
    jobs_.erase(it);
    state_.free_sm += job.sm;
    state_.running_jobs -= 1;
    LlmQueues& q = state_.llms[job.llm];
    if (job.kind == JobKind::Prefill) {
      state_.running_prefills -= 1;
      q.prefill_running = false;
      for (int rid : job.members) {
        UnitRequest& r = state_.requests[rid];
        r.first_token_ms = now_;
        if (r.output_len == 1) {
          finish_request(job.llm, rid);
        } else {
          q.decoding.push_back(rid);
        }
      }
    } else {
      q.decode_running = false;
      bool any_finished = false;
      for (int rid : job.members) {
        UnitRequest& r = state_.requests[rid];
        r.steps_done += 1;
        if (r.steps_done == r.output_len - 1) {
          finish_request(job.llm, rid);
          any_finished = true;
        }
      }
      if (any_finished) {
        q.decoding.erase(std::remove_if(q.decoding.begin(), q.decoding.end(),
                                        [&](int rid) { return state_.requests[rid].finished; }),
                         q.decoding.end());
      }
    }
  }

  void finish_request(int llm, int rid) {
    UnitRequest& r = state_.requests[rid];
    r.done_ms = now_;
    r.finished = true;
    pool_.free_request(llm, rid);
    finished_ += 1;
  }

  void quota_tick(double period_ms) {
    int n = static_cast<int>(specs_.size());
    if (params_.scheduler == SchedKind::Adbs && n > 1) {
      std::vector<double> utils(n, 0.0);
      std::vector<std::int64_t> quotas(n, 0);
      for (int i = 0; i < n; ++i) {
        quotas[i] = pool_.quota(i);
        double denom = period_ms * static_cast<double>(std::max<std::int64_t>(1, quotas[i]));
        utils[i] = usage_[i].tick_block_ms / denom;
      }
      std::vector<std::int64_t> next = adapt_quota(utils, quotas, quota_floor_, params_.adapt);
      for (int i = 0; i < n; ++i) pool_.set_quota(i, next[i]);
    }
    for (int i = 0; i < n; ++i) {
      samples_.push_back({now_ / 1000.0, state_.llms[i].name, pool_.used(i), pool_.quota(i)});
      usage_[i].tick_block_ms = 0.0;
    }
    if (finished_ < static_cast<std::int64_t>(trace_.size()))
      push_event(now_ + period_ms, kQuotaTick, 0);
  }

  void launch(JobPlan plan) {
    const LLMSpec& spec = *specs_[plan.llm];
    ExecConfig cfg{tp_, plan.sm_demand};
    double base =
        plan.kind == JobKind::Prefill
            ? prefill_latency(spec, prof_, cfg, static_cast<int>(plan.members.size()),
                              plan.prompt_tokens)
            : decode_step_latency(spec, prof_, cfg, static_cast<int>(plan.members.size()),
                                  plan.avg_context);
    double adj = interference_adjust(1.0 - state_.free_sm, plan.sm_demand, params_.kappa);
    double done = now_ + base * adj;
    if (log_level() >= LogLevel::Debug) {
      std::ostringstream os;
      os << "{\"t_ms\":" << now_ << ",\"action\":\"launch\",\"unit\":" << unit_index_
         << ",\"llm\":\"" << state_.llms[plan.llm].name << "\",\"kind\":\""
         << kind_name(plan.kind) << "\",\"sm\":" << plan.sm_demand << ",\"batch\":"
         << plan.members.size() << ",\"duration_ms\":" << base * adj << "}";
      log_debug(os.str());
    }
    std::int64_t id = next_job_id_++;
    jobs_[id] = {plan.llm, plan.kind, std::move(plan.members), plan.sm_demand};
    push_event(done, kJobDone, id);
  }

  void detect_stall(bool launched_nothing) {
    bool no_arrivals_left = arrived_ == static_cast<std::int64_t>(trace_.size());
    bool stuck = state_.running_jobs == 0 && launched_nothing && no_arrivals_left &&
                 finished_ < static_cast<std::int64_t>(trace_.size());
    stall_ticks_ = stuck ? stall_ticks_ + 1 : 0;
    if (stall_ticks_ >= 3)
      throw std::logic_error("unit " + std::to_string(unit_index_) +
                             " deadlocked: no runnable work and unfinished requests");
  }

  int unit_index_;
  int tp_;
  const LatencyProfile& prof_;
  const EngineParams& params_;
  SchedulerParams sparams_;
  BlockPool pool_;
  UnitState state_;
  std::vector<const LLMSpec*> specs_;
  std::vector<int> entry_idx_;

  std::vector<Request> trace_;
  std::vector<int> trace_llm_;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::unordered_map<std::int64_t, RunningJob> jobs_;
  std::int64_t seq_ = 0;
  std::int64_t next_job_id_ = 0;
  std::int64_t finished_ = 0;
  std::int64_t arrived_ = 0;
  double now_ = 0.0;
  double last_integral_ms_ = 0.0;
  std::vector<LlmUsageAccum> usage_;
  std::vector<PoolSample> samples_;
  std::int64_t quota_floor_ = 0;
  int stall_ticks_ = 0;
};

}  // namespace

SimResult run_simulation(const Cluster& cluster, const PlacementResult& placement,
                         const std::vector<LlmEntry>& entries, const std::vector<Request>& trace,
                         const LatencyProfile& prof, const EngineParams& params) {
  cluster.validate();
  prof.validate();
  if (params.quota_period_s <= 0.0) throw std::invalid_argument("quota_period_s must be positive");
  if (params.block_tokens < 1) throw std::invalid_argument("block_tokens must be >= 1");

  std::vector<std::unique_ptr<UnitSim>> units;
  std::map<std::string, UnitSim*> by_name;
  int ui = 0;
  for (const LLMUnit& u : placement.units) {
    if (u.llms.empty()) {
      ++ui;
      continue;
    }
    units.push_back(std::make_unique<UnitSim>(ui, u, entries, cluster, prof, params));
    for (const PlacedLlm& p : u.llms) {
      if (!by_name.emplace(entries[p.llm].spec.name, units.back().get()).second)
        throw std::invalid_argument("model '" + entries[p.llm].spec.name +
                                    "' appears in two units");
    }
    ++ui;
  }

  for (const Request& r : trace) {
    auto it = by_name.find(r.llm);
    if (it == by_name.end())
      throw std::invalid_argument("trace references model '" + r.llm +
                                  "' which the placement does not serve");
    it->second->add_trace_row(r, it->second->find_llm(r.llm));
  }

  SimResult result;
  for (auto& unit : units) {
    unit->run();
    UnitStats stats;
    unit->collect(result.records, stats, entries);
    result.units.push_back(std::move(stats));
  }
  std::sort(result.records.begin(), result.records.end(),
            [](const RequestRecord& a, const RequestRecord& b) { return a.id < b.id; });
  return result;
}

}  // namespace muxsim
