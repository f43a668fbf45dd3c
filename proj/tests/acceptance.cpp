// Acceptance suite: ten end-to-end checks, one printed verdict line each.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "muxsim/config.hpp"
#include "muxsim/kv_manager.hpp"
#include "muxsim/metrics.hpp"
#include "muxsim/placement.hpp"
#include "muxsim/rng.hpp"
#include "muxsim/sim_engine.hpp"
#include "muxsim/workload.hpp"

#ifndef MUXSIM_BIN
#error "MUXSIM_BIN must be defined to the muxsim executable path"
#endif

using namespace muxsim;

namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kGiB = 1LL << 30;

std::string strf(const char* fmt, ...) {
  char buf[768];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return buf;
}

void verdict(int criterion, bool ok, const std::string& detail) {
  std::printf("ACCEPT C%d %s: %s\n", criterion, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(ok, "criterion " << criterion << ": " << detail);
}

LLMSpec catalog_spec(const std::string& model, const std::string& name) {
  LLMSpec s = model_catalog().at(model);
  s.name = name;
  return s;
}

// One unit spanning the given gpus, serving every listed entry at the full
// mesh width.
PlacementResult colocated_unit(std::vector<int> gpus, const std::vector<LlmEntry>& entries) {
  PlacementResult r;
  r.backend = "greedy";
  LLMUnit u;
  u.mesh.node = 0;
  u.mesh.gpu_ids = std::move(gpus);
  for (size_t i = 0; i < entries.size(); ++i)
    u.llms.push_back({static_cast<int>(i), {u.mesh.size(), 0.5, 16, 0.0, false}});
  r.units.push_back(std::move(u));
  return r;
}

std::vector<MetricsLlmInput> metric_inputs(const std::vector<LlmEntry>& entries, int tp) {
  std::vector<MetricsLlmInput> in;
  for (const LlmEntry& e : entries) in.push_back({e.spec.name, e.rate, &e.spec, tp});
  return in;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

/*
 * Criteria 1 and 2 share one scenario: two models colocated on a four-GPU
 * tensor-parallel unit, with a 1:8 request-rate split, a 4:1 length split,
 * and a cache pool sized below the joint working set, pushed past saturation
 * so the scheduling policy decides who makes progress.
 */
TEST_CASE("contended colocation separates the schedulers") {
  const double base_rate = 10.0;
  const double horizon = 40.0;

  Cluster cluster;
  cluster.num_nodes = 1;
  cluster.gpus_per_node = 4;
  cluster.gpu_memory_bytes = static_cast<std::int64_t>(std::llround(7.5 * kGiB));

  // The low-rate model is generation-heavy, so each of its requests holds
  // cache blocks for a long residency; fixed lengths keep the contention
  // deterministic instead of riding a sampled tail.
  std::vector<LlmEntry> entries = {
      {catalog_spec("7b", "llm-long"), base_rate, 128.0, 384.0},
      {catalog_spec("7b", "llm-short"), 8.0 * base_rate, 64.0, 64.0},
  };
  PlacementResult placement = colocated_unit({0, 1, 2, 3}, entries);

  WorkloadSpec wspec;
  wspec.llms.push_back(
      {"llm-long", base_rate, LengthDist::constant(128), LengthDist::constant(384)});
  wspec.llms.push_back(
      {"llm-short", 8.0 * base_rate, LengthDist::constant(64), LengthDist::constant(64)});
  wspec.horizon_s = horizon;
  wspec.seed = 42;
  std::vector<Request> trace = gen_workload(wspec);
  REQUIRE(trace.size() > 1000);

  LatencyProfile prof;
  EngineParams params;
  params.quota_period_s = 1.0;
  params.warmup_s = 8.0;
  params.token_budget = 768;

  const SchedKind kinds[] = {SchedKind::Adbs, SchedKind::RoundRobin, SchedKind::Fcfs};
  double tpt[3] = {0, 0, 0};
  double rgap[3] = {0, 0, 0};

  auto t0 = std::chrono::steady_clock::now();
  for (int k = 0; k < 3; ++k) {
    params.scheduler = kinds[k];
    SimResult sim = run_simulation(cluster, placement, entries, trace, prof, params);
    MetricsReport rep =
        compute_metrics(sim.records, metric_inputs(entries, 4), horizon, {8.0}, prof, false);
    tpt[k] = rep.aggregated_throughput_rps;
    rgap[k] = max_resource_gap(sim.units);
  }
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  bool order_ok = tpt[0] >= 1.10 * tpt[1] && tpt[1] >= 1.10 * tpt[2];
  bool time_ok = elapsed < 60.0;
  verdict(1, order_ok && time_ok,
          strf("throughput adbs %.2f > round-robin %.2f > fcfs %.2f rps "
               "(gaps %.0f%% and %.0f%%), %.1f s wall",
               tpt[0], tpt[1], tpt[2], 100.0 * (tpt[0] / tpt[1] - 1.0),
               100.0 * (tpt[1] / tpt[2] - 1.0), elapsed));

  bool fair_ok = rgap[0] <= 0.15 && rgap[2] > 0.15;
  verdict(2, fair_ok,
          strf("cache-usage gap adbs %.3f <= 0.15, fcfs %.3f > 0.15", rgap[0], rgap[2]));
}

/*
 * Criteria 3 and 4 share a randomized suite of small placement instances:
 * exact assignment beats greedy everywhere (and matches full enumeration on
 * small programs), and every unsaturated SM share is the smallest in the
 * list that still meets its rate.
 */
TEST_CASE("randomized placement instances: exactness and minimality") {
  struct Desk {
    Cluster cluster;
    std::vector<LlmEntry> entries;
  };
  PlacementParams params;
  LatencyProfile prof;
  Rng rng(2026, "acceptance-desks");

  auto random_desk = [&]() {
    static const std::pair<int, int> shapes[] = {{1, 1}, {1, 2}, {1, 4}, {2, 2}, {2, 1}, {4, 1}};
    static const char* models[] = {"7b", "7b", "13b", "30b"};
    Desk d;
    auto shape = shapes[rng.next_u64() % 6];
    d.cluster.num_nodes = shape.first;
    d.cluster.gpus_per_node = shape.second;
    d.cluster.gpu_memory_bytes =
        static_cast<std::int64_t>(std::llround((24.0 + 56.0 * rng.uniform01()) * kGiB));
    int n = 1 + static_cast<int>(rng.next_u64() % 4);
    for (int i = 0; i < n; ++i) {
      LLMSpec s = catalog_spec(models[rng.next_u64() % 4], "m" + std::to_string(i));
      double rate = 0.2 + 15.0 * rng.uniform01();
      double prompt = std::floor(16.0 + 497.0 * rng.uniform01());
      double output = std::floor(4.0 + 125.0 * rng.uniform01());
      d.entries.push_back({s, rate, prompt, output});
    }
    return d;
  };

  std::vector<Desk> desks;
  std::vector<double> ratios;  // greedy objective / exact objective
  bool dominance_ok = true, never_above = true;
  int enum_checked = 0, enum_mismatch = 0;

  for (int attempt = 0; attempt < 400 && desks.size() < 60; ++attempt) {
    Desk d = random_desk();
    PlacementResult greedy, exact;
    try {
      greedy = place(d.cluster, d.entries, prof, params, "greedy");
      exact = place(d.cluster, d.entries, prof, params, "ilp");
    } catch (const InfeasibleError&) {
      continue;  // models the hardware cannot host at all
    }
    REQUIRE(exact.objective > 0.0);
    if (exact.objective < greedy.objective - 1e-9) dominance_ok = false;
    double ratio = greedy.objective / exact.objective;
    if (ratio > 1.0 + 1e-9) never_above = false;
    ratios.push_back(ratio);

    // Exact solver versus full enumeration on every small assignment program.
    std::vector<std::vector<ParallelCandidate>> cands =
        llm_parallel_candidates(d.entries, d.cluster, prof, params);
    for (const MeshGroup& group : enumerate_mesh_groups(d.cluster, d.entries)) {
      IlpInstance inst = build_ilp_instance(group, d.entries, cands, d.cluster, params);
      if (inst.n_llms * inst.n_meshes > 12) continue;
      IlpSolution fast = solve_ilp(inst, params.max_ilp_dims);
      IlpSolution slow = brute_force_ilp(inst);
      ++enum_checked;
      if (fast.feasible != slow.feasible ||
          (fast.feasible && std::abs(fast.objective - slow.objective) > 1e-9))
        ++enum_mismatch;
    }
    desks.push_back(std::move(d));
  }

  size_t n = ratios.size();
  size_t good = 0;
  double gap_sum = 0.0;
  for (double r : ratios) {
    if (r >= 0.90) ++good;
    gap_sum += 1.0 - r;
  }
  bool quality_ok = n >= 50 && good >= static_cast<size_t>(std::ceil(0.8 * double(n)));
  verdict(3,
          dominance_ok && never_above && quality_ok && enum_checked > 0 && enum_mismatch == 0,
          strf("%zu instances: exact >= greedy on all, greedy within 90%% on %zu (mean gap "
               "%.2f%%), %d programs match full enumeration",
               n, good, 100.0 * gap_sum / double(n), enum_checked));

  // Minimality: no smaller listed share meets the rate at the same width.
  std::vector<double> sm_list = params.effective_sm_list();
  long scanned = 0, violations = 0;
  for (const Desk& d : desks) {
    std::vector<std::vector<ParallelCandidate>> cands =
        llm_parallel_candidates(d.entries, d.cluster, prof, params);
    for (size_t i = 0; i < d.entries.size(); ++i) {
      const LlmEntry& e = d.entries[i];
      if (!(e.rate > 0.0)) continue;
      for (const ParallelCandidate& cand : cands[i]) {
        double usable = (1.0 - params.activation_reserve_frac) * cand.tp_degree *
                        static_cast<double>(d.cluster.gpu_memory_bytes);
        double kv = usable - static_cast<double>(e.spec.weight_bytes);
        double per_req =
            e.spec.kv_bytes_per_token() * (e.mean_prompt_tokens + e.mean_output_tokens);
        int max_batch =
            static_cast<int>(std::clamp(std::floor(kv / per_req), 1.0, double(params.max_batch)));
        if (cand.saturated) {
          if (cand.num_sm != sm_list.back()) ++violations;
          continue;
        }
        for (double sm : sm_list) {
          if (sm >= cand.num_sm) break;
          ++scanned;
          ThroughputEstimate below =
              estimate_throughput(e.spec, prof, sm, cand.tp_degree, e.rate, {},
                                  e.mean_prompt_tokens, e.mean_output_tokens, max_batch);
          if (!below.saturated) ++violations;
        }
      }
    }
  }
  verdict(4, violations == 0 && scanned > 0,
          strf("%ld smaller shares scanned across %zu instances, %ld violations", scanned,
               desks.size(), violations));
}

/*
 * Criterion 5: on a single stable unit the planner's throughput estimate and
 * the simulated throughput agree within 25% across a ten-point rate sweep
 * spanning 50-80% of capacity.
 */
TEST_CASE("planner estimates track simulated throughput") {
  Cluster cluster;
  cluster.num_nodes = 1;
  cluster.gpus_per_node = 1;
  cluster.gpu_memory_bytes = 24 * kGiB;
  LatencyProfile prof;
  PlacementParams pparams;

  LLMSpec spec = catalog_spec("7b", "solo");
  const double prompt = 64.0, output = 16.0;

  // Capacity: the saturated estimate at the full SM share.
  double usable = (1.0 - pparams.activation_reserve_frac) * cluster.gpu_memory_bytes;
  int cap_batch = static_cast<int>(
      std::clamp(std::floor((usable - spec.weight_bytes) / (spec.kv_bytes_per_token() * (prompt + output))),
                 1.0, double(pparams.max_batch)));
  ThroughputEstimate cap =
      estimate_throughput(spec, prof, 1.0, 1, 1e9, {}, prompt, output, cap_batch);
  REQUIRE(cap.saturated);

  const double horizon = 200.0;
  double worst = 0.0;
  bool all_ok = true;
  for (int k = 0; k < 10; ++k) {
    double rate = cap.throughput * (0.50 + 0.30 * k / 9.0);
    std::vector<LlmEntry> entries = {{spec, rate, prompt, output}};
    PlacementResult plan = place(cluster, entries, prof, pparams, "greedy");

    double est = 0.0;
    for (const LLMUnit& u : plan.units)
      for (const PlacedLlm& p : u.llms) est = p.candidate.est_tpt;
    REQUIRE(est > 0.0);

    WorkloadSpec wspec;
    wspec.llms.push_back({"solo", rate, LengthDist::constant(prompt), LengthDist::constant(output)});
    wspec.horizon_s = horizon;
    wspec.seed = 900 + static_cast<std::uint64_t>(k);
    std::vector<Request> trace = gen_workload(wspec);

    EngineParams params;
    SimResult sim = run_simulation(cluster, plan, entries, trace, prof, params);
    MetricsReport rep =
        compute_metrics(sim.records, metric_inputs(entries, 1), horizon, {8.0}, prof, false);
    double simulated = rep.llms[0].throughput_rps;
    REQUIRE(simulated > 0.0);
    double rel = std::abs(est - simulated) / simulated;
    worst = std::max(worst, rel);
    if (rel > 0.25) all_ok = false;
  }
  verdict(5, all_ok,
          strf("ten rates spanning %.1f-%.1f rps: worst estimate error %.1f%% (bound 25%%)",
               0.5 * cap.throughput, 0.8 * cap.throughput, 100.0 * worst));
}

/*
 * Criterion 6: power-law popularity concentrates the right share of traffic
 * on the top fifth of models, and arrival counts stay within three standard
 * deviations of the Poisson mean over long horizons.
 */
TEST_CASE("workload generator matches its target distributions") {
  double share_mild = top_share(gen_rates(19, 0.9, 40.0));
  double share_steep = top_share(gen_rates(19, 2.1, 40.0));
  bool share_ok =
      std::abs(share_mild - 0.50) <= 0.05 && std::abs(share_steep - 0.90) <= 0.05;

  bool poisson_ok = true;
  std::string counts;
  for (double rate : {0.5, 2.0, 8.0}) {
    Rng rng(42, strf("acceptance-poisson-%.1f", rate));
    double n = static_cast<double>(gen_arrivals(rate, 1e4, rng).size());
    double lambda = rate * 1e4;
    double sigmas = std::abs(n - lambda) / std::sqrt(lambda);
    if (sigmas > 3.0) poisson_ok = false;
    counts += strf(" %.0f@%.1f(%.1fsd)", n, rate, sigmas);
  }
  verdict(6, share_ok && poisson_ok,
          strf("top-20%% share %.3f (alpha 0.9) and %.3f (alpha 2.1); arrivals%s",
               share_mild, share_steep, counts.c_str()));
}

/*
 * Criterion 7: ten thousand randomized allocator operations against a
 * model-based oracle: exact byte-keeping, atomic failures, conserved pool,
 * and quota sums preserved by every adaptation.
 */
TEST_CASE("allocator fuzz against a shadow model") {
  const LLMSpec tiny{"tiny", 1, 1, 128, 4096, 1000, 2};
  const int block_tokens = 16;
  const std::int64_t pool_blocks = 400;
  const int n_llms = 3;

  BlockPool pool(pool_blocks);
  std::vector<LLMSpec> specs(n_llms, tiny);
  for (int i = 0; i < n_llms; ++i) {
    specs[i].name = "tiny" + std::to_string(i);
    pool.register_llm(i, &specs[i], block_tokens);
  }
  std::vector<std::int64_t> quotas = {150, 150, 100};
  for (int i = 0; i < n_llms; ++i) pool.set_quota(i, quotas[i]);

  std::map<std::pair<int, std::int64_t>, std::int64_t> shadow;  // (llm, rid) -> tokens
  auto shadow_used = [&](int llm) {
    std::int64_t used = 0;
    for (const auto& kv : shadow)
      if (kv.first.first == llm) used += blocks_for_tokens(specs[llm], block_tokens, kv.second);
    return used;
  };

  Rng rng(7, "acceptance-fuzz");
  std::int64_t next_rid = 0;
  long failures = 0, frees = 0, adapts = 0;
  bool ok = true;

  for (int op = 0; op < 10000 && ok; ++op) {
    double roll = rng.uniform01();
    if (roll < 0.55) {
      int llm = static_cast<int>(rng.next_u64() % n_llms);
      bool fresh = shadow.empty() || rng.uniform01() < 0.4;
      std::int64_t rid;
      if (fresh) {
        rid = next_rid++;
      } else {
        auto it = shadow.begin();
        std::advance(it, static_cast<long>(rng.next_u64() % shadow.size()));
        llm = it->first.first;
        rid = it->first.second;
      }
      std::int64_t add = 1 + static_cast<std::int64_t>(rng.next_u64() % 40);
      bool enforce = rng.uniform01() < 0.7;

      std::int64_t old_tokens = 0;
      auto it = shadow.find({llm, rid});
      if (it != shadow.end()) old_tokens = it->second;
      std::int64_t need = blocks_for_tokens(specs[llm], block_tokens, old_tokens + add) -
                          blocks_for_tokens(specs[llm], block_tokens, old_tokens);
      bool quota_ok = !enforce || pool.used(llm) + need <= pool.quota(llm);
      bool pool_ok = need <= pool.free_blocks();

      std::int64_t used_before = pool.used(llm), free_before = pool.free_blocks();
      AllocResult r = pool.alloc(llm, rid, add, enforce);
      if (r.ok != (quota_ok && pool_ok)) ok = false;
      if (r.ok) {
        shadow[{llm, rid}] = old_tokens + add;
      } else {
        ++failures;
        // Failures must leave no trace.
        if (pool.used(llm) != used_before || pool.free_blocks() != free_before) ok = false;
      }
    } else if (roll < 0.80) {
      if (shadow.empty()) continue;
      auto it = shadow.begin();
      std::advance(it, static_cast<long>(rng.next_u64() % shadow.size()));
      pool.free_request(it->first.first, it->first.second);
      shadow.erase(it);
      ++frees;
    } else {
      std::vector<double> utils(n_llms);
      for (double& u : utils) u = rng.uniform01() * 1.2;  // sometimes past 1, clamped inside
      std::vector<std::int64_t> next = adapt_quota(utils, quotas, 8, {});
      std::int64_t before = 0, after = 0;
      for (int i = 0; i < n_llms; ++i) {
        before += quotas[i];
        after += next[i];
      }
      if (before != after) ok = false;
      quotas = next;
      for (int i = 0; i < n_llms; ++i) pool.set_quota(i, quotas[i]);
      ++adapts;
    }

    std::int64_t total_used = 0;
    for (int i = 0; i < n_llms; ++i) {
      if (pool.used(i) != shadow_used(i)) ok = false;
      total_used += pool.used(i);
    }
    if (total_used + pool.free_blocks() != pool_blocks) ok = false;
    pool.check_conservation();
  }
  verdict(7, ok,
          strf("10000 ops (%ld rejected, %ld frees, %ld adaptations): bookkeeping matches the "
               "shadow model",
               failures, frees, adapts));
}

/*
 * Criterion 8: two identical `simulate` invocations of the installed binary
 * produce byte-identical records.csv and metrics.json.
 */
TEST_CASE("simulate is byte-reproducible end to end") {
  fs::path dir = fs::temp_directory_path() / "muxsim_accept_c8";
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::ofstream cfg(dir / "config.json");
  cfg << R"({
    "cluster": {"num_nodes": 1, "gpus_per_node": 2, "gpu_memory_gb": 40},
    "llms": [
      {"name": "alpha", "model": "7b", "rate_rps": 5.0,
       "prompt_len": {"kind": "lognormal", "mean": 80},
       "output_len": {"kind": "constant", "value": 16}},
      {"name": "beta", "model": "13b", "rate_rps": 2.0,
       "prompt_len": {"kind": "lognormal", "mean": 120},
       "output_len": {"kind": "constant", "value": 8}}
    ],
    "workload": {"horizon_s": 6, "seed": 17}
  })";
  cfg.close();

  auto run = [&](const std::string& out) {
    std::string cmd = std::string(MUXSIM_BIN) + " simulate -c " + (dir / "config.json").string() +
                      " -o " + (dir / out).string() + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return status != -1 && WIFEXITED(status) && WEXITSTATUS(status) == 0;
  };
  bool ran = run("r1") && run("r2");
  REQUIRE(ran);

  std::string rec1 = slurp(dir / "r1" / "records.csv");
  std::string met1 = slurp(dir / "r1" / "metrics.json");
  bool identical =
      rec1 == slurp(dir / "r2" / "records.csv") && met1 == slurp(dir / "r2" / "metrics.json");
  verdict(8, identical && rec1.size() > 100,
          strf("two runs, %zu-byte records.csv and %zu-byte metrics.json identical", rec1.size(),
               met1.size()));
}

/*
 * Criterion 9: with a single model there is nothing to arbitrate, so the
 * block-quota scheduler must reproduce first-come-first-served timings
 * exactly, record for record.
 */
TEST_CASE("one model collapses the schedulers together") {
  Cluster cluster;
  cluster.num_nodes = 1;
  cluster.gpus_per_node = 1;
  cluster.gpu_memory_bytes = 24 * kGiB;
  LatencyProfile prof;

  std::vector<LlmEntry> entries = {{catalog_spec("7b", "solo"), 12.0, 64.0, 16.0}};
  PlacementResult placement = colocated_unit({0}, entries);

  WorkloadSpec wspec;
  wspec.llms.push_back({"solo", 12.0, LengthDist::lognormal(64.0), LengthDist::lognormal(16.0)});
  wspec.horizon_s = 25.0;
  wspec.seed = 5;
  std::vector<Request> trace = gen_workload(wspec);
  REQUIRE(trace.size() > 100);

  EngineParams params;
  params.quota_period_s = 2.0;

  params.scheduler = SchedKind::Adbs;
  SimResult a = run_simulation(cluster, placement, entries, trace, prof, params);
  params.scheduler = SchedKind::Fcfs;
  SimResult f = run_simulation(cluster, placement, entries, trace, prof, params);

  bool same = a.records.size() == f.records.size();
  for (size_t i = 0; same && i < a.records.size(); ++i) {
    same = a.records[i].id == f.records[i].id &&
           a.records[i].first_token_s == f.records[i].first_token_s &&
           a.records[i].done_s == f.records[i].done_s;
  }
  verdict(9, same,
          strf("%zu requests: every first-token and completion time matches fcfs exactly",
               a.records.size()));
}

/*
 * Criterion 10: in every sweep row the SLO attainment is non-decreasing
 * across the scale ladder {1, 2, 4, 8, 16}.
 */
TEST_CASE("slo attainment grows with the scale ladder") {
  Cluster cluster;
  cluster.num_nodes = 1;
  cluster.gpus_per_node = 2;
  cluster.gpu_memory_bytes = 40 * kGiB;
  LatencyProfile prof;
  PlacementParams pparams;
  const std::vector<double> scales = {1.0, 2.0, 4.0, 8.0, 16.0};
  const double horizon = 12.0;

  bool monotone = true;
  int rows = 0;
  for (double rate_scale : {0.5, 1.0, 2.0}) {
    std::vector<LlmEntry> entries = {
        {catalog_spec("7b", "alpha"), 6.0 * rate_scale, 96.0, 24.0},
        {catalog_spec("13b", "beta"), 2.0 * rate_scale, 160.0, 12.0},
    };
    PlacementResult plan = place(cluster, entries, prof, pparams, "greedy");

    WorkloadSpec wspec;
    wspec.llms.push_back(
        {"alpha", 6.0 * rate_scale, LengthDist::lognormal(96.0), LengthDist::lognormal(24.0)});
    wspec.llms.push_back(
        {"beta", 2.0 * rate_scale, LengthDist::lognormal(160.0), LengthDist::lognormal(12.0)});
    wspec.horizon_s = horizon;
    wspec.seed = 1234;
    std::vector<Request> trace = gen_workload(wspec);

    for (SchedKind kind : {SchedKind::Fcfs, SchedKind::RoundRobin, SchedKind::Adbs}) {
      EngineParams params;
      params.scheduler = kind;
      SimResult sim = run_simulation(cluster, plan, entries, trace, prof, params);
      // tp per model comes from the plan, not a shared constant.
      std::vector<MetricsLlmInput> inputs = metric_inputs(entries, 1);
      for (const LLMUnit& u : plan.units)
        for (const PlacedLlm& p : u.llms) inputs[p.llm].tp_degree = p.candidate.tp_degree;
      MetricsReport rep = compute_metrics(sim.records, inputs, horizon, scales, prof, false);

      ++rows;
      for (const LlmMetrics& m : rep.llms)
        for (size_t i = 1; i < scales.size(); ++i)
          if (m.slo_attainment[i] < m.slo_attainment[i - 1]) monotone = false;
      for (size_t i = 1; i < scales.size(); ++i)
        if (rep.overall_slo[i] < rep.overall_slo[i - 1]) monotone = false;
    }
  }
  verdict(10, monotone && rows == 9,
          strf("%d sweep rows, per-model and overall attainment non-decreasing over "
               "{1,2,4,8,16}",
               rows));
}
