#include "muxsim/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "muxsim/log.hpp"
#include "muxsim/metrics.hpp"
#include "muxsim/sim_engine.hpp"
#include "muxsim/workload.hpp"

namespace muxsim {

namespace {

using nlohmann::json;

std::string pick_path(const std::string& flag, const std::string& config_default,
                      const std::string& fallback) {
  if (!flag.empty()) return flag;
  if (!config_default.empty()) return config_default;
  return fallback;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ConfigError("write to '" + path + "' failed");
}

const char* sched_name(SchedKind k) {
  switch (k) {
    case SchedKind::Fcfs:
      return "fcfs";
    case SchedKind::RoundRobin:
      return "round_robin";
    default:
      return "adbs";
  }
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, x);
  return buf;
}

// Per-model tensor-parallel degrees of a placement, keyed by serving name.
std::map<std::string, int> placed_tp(const PlacementResult& plan,
                                     const std::vector<LlmEntry>& entries) {
  std::map<std::string, int> tp;
  for (const LLMUnit& u : plan.units)
    for (const PlacedLlm& p : u.llms) tp[entries[p.llm].spec.name] = p.candidate.tp_degree;
  return tp;
}

std::vector<MetricsLlmInput> metrics_inputs(const std::vector<LlmEntry>& entries,
                                            const PlacementResult& plan) {
  std::map<std::string, int> tp = placed_tp(plan, entries);
  std::vector<MetricsLlmInput> out;
  for (const LlmEntry& e : entries) {
    auto it = tp.find(e.spec.name);
    if (it == tp.end())
      throw ConfigError("plan does not place model '" + e.spec.name + "'");
    out.push_back({e.spec.name, e.rate, &e.spec, it->second});
  }
  return out;
}

void write_records_csv(const std::string& path, const std::vector<RequestRecord>& records) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ConfigError("cannot write '" + path + "'");
  std::fprintf(f, "id,llm,arrival_s,ttft_s,tpot_s,done_s\n");
  for (const RequestRecord& r : records) {
    double ttft = r.first_token_s - r.arrival_s;
    double tpot = r.output_len > 1
                      ? (r.done_s - r.first_token_s) / static_cast<double>(r.output_len - 1)
                      : 0.0;
    std::fprintf(f, "%lld,%s,%.9f,%.9f,%.9f,%.9f\n", static_cast<long long>(r.id), r.llm.c_str(),
                 r.arrival_s, ttft, tpot, r.done_s);
  }
  std::fclose(f);
}

std::string poolstats_json(const std::vector<UnitStats>& units) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json ju = nlohmann::ordered_json::array();
  for (const UnitStats& u : units) {
    nlohmann::ordered_json e;
    e["unit"] = u.unit;
    e["total_blocks"] = u.total_blocks;
    nlohmann::ordered_json ms = nlohmann::ordered_json::array();
    for (const UnitLlmStats& m : u.llms) {
      nlohmann::ordered_json me;
      me["name"] = m.llm;
      me["rate_rps"] = m.rate;
      me["avg_used_blocks"] = m.avg_used_blocks;
      me["final_quota_blocks"] = m.final_quota_blocks;
      me["resource_usage"] = m.resource_usage;
      ms.push_back(std::move(me));
    }
    e["models"] = std::move(ms);
    nlohmann::ordered_json samples = nlohmann::ordered_json::array();
    for (const PoolSample& s : u.samples) {
      nlohmann::ordered_json se;
      se["t_s"] = s.t_s;
      se["llm"] = s.llm;
      se["used_blocks"] = s.used_blocks;
      se["quota_blocks"] = s.quota_blocks;
      samples.push_back(std::move(se));
    }
    e["samples"] = std::move(samples);
    ju.push_back(std::move(e));
  }
  j["units"] = std::move(ju);
  return j.dump(2) + "\n";
}

struct SimOutcome {
  SimResult sim;
  MetricsReport report;
};

SimOutcome simulate_once(const ExperimentConfig& cfg, const PlacementResult& plan,
                         const std::vector<LlmEntry>& entries, const std::vector<Request>& trace,
                         const EngineParams& engine) {
  SimOutcome out;
  out.sim = run_simulation(cfg.cluster, plan, entries, trace, cfg.profile, engine);
  out.report = compute_metrics(out.sim.records, metrics_inputs(entries, plan), cfg.horizon_s,
                               cfg.slo_scales, cfg.profile, cfg.slo_reference_tp_one);
  return out;
}

}  // namespace

std::string placement_to_json(const PlacementResult& result, const std::vector<LlmEntry>& entries) {
  nlohmann::ordered_json j;
  j["backend"] = result.backend;
  j["est_total_tpt_rps"] = result.est_total_tpt;
  j["objective"] = result.objective;
  nlohmann::ordered_json units = nlohmann::ordered_json::array();
  for (const LLMUnit& u : result.units) {
    nlohmann::ordered_json e;
    e["node"] = u.mesh.node;
    e["gpu_ids"] = u.mesh.gpu_ids;
    nlohmann::ordered_json ms = nlohmann::ordered_json::array();
    for (const PlacedLlm& p : u.llms) {
      nlohmann::ordered_json me;
      me["name"] = entries[p.llm].spec.name;
      me["tp_degree"] = p.candidate.tp_degree;
      me["num_sm"] = p.candidate.num_sm;
      me["batch"] = p.candidate.batch;
      me["est_tpt_rps"] = p.candidate.est_tpt;
      me["saturated"] = p.candidate.saturated;
      ms.push_back(std::move(me));
    }
    e["models"] = std::move(ms);
    units.push_back(std::move(e));
  }
  j["units"] = std::move(units);
  return j.dump(2) + "\n";
}

PlacementResult placement_from_json(const std::string& text, const std::vector<LlmEntry>& entries) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("plan: invalid JSON: ") + e.what());
  }
  if (!root.is_object() || !root.contains("units") || !root["units"].is_array())
    throw ConfigError("plan: expected an object with a 'units' array");

  std::map<std::string, int> by_name;
  for (size_t i = 0; i < entries.size(); ++i)
    by_name[entries[i].spec.name] = static_cast<int>(i);

  PlacementResult result;
  result.backend = root.value("backend", std::string("greedy"));
  result.est_total_tpt = root.value("est_total_tpt_rps", 0.0);
  result.objective = root.value("objective", 0.0);
  for (const json& ju : root["units"]) {
    if (!ju.is_object() || !ju.contains("gpu_ids") || !ju["gpu_ids"].is_array())
      throw ConfigError("plan: each unit needs a gpu_ids array");
    LLMUnit u;
    u.mesh.node = ju.value("node", 0);
    for (const json& g : ju["gpu_ids"]) {
      if (!g.is_number_integer()) throw ConfigError("plan: gpu_ids must be integers");
      u.mesh.gpu_ids.push_back(g.get<int>());
    }
    if (ju.contains("models")) {
      if (!ju["models"].is_array()) throw ConfigError("plan: unit models must be an array");
      for (const json& jm : ju["models"]) {
        if (!jm.is_object() || !jm.contains("name") || !jm["name"].is_string())
          throw ConfigError("plan: each placed model needs a name");
        std::string name = jm["name"].get<std::string>();
        auto it = by_name.find(name);
        if (it == by_name.end())
          throw ConfigError("plan: model '" + name + "' is not in the config");
        PlacedLlm p;
        p.llm = it->second;
        p.candidate.tp_degree = jm.value("tp_degree", u.mesh.size());
        p.candidate.num_sm = jm.value("num_sm", 1.0);
        p.candidate.batch = jm.value("batch", 1);
        p.candidate.est_tpt = jm.value("est_tpt_rps", 0.0);
        p.candidate.saturated = jm.value("saturated", false);
        u.llms.push_back(std::move(p));
      }
    }
    result.units.push_back(std::move(u));
  }
  return result;
}

int run_gen_workload(const ExperimentConfig& cfg, const std::string& trace_path) {
  std::string path = pick_path(trace_path, cfg.outputs.trace, "trace.csv");
  std::vector<Request> trace = gen_workload(config_workload(cfg));
  save_trace(trace, path);

  std::printf("%-24s %12s\n", "model", "rate_rps");
  std::vector<double> rates;
  double total = 0.0;
  for (const LlmConfig& c : cfg.llms) {
    std::printf("%-24s %12.4f\n", c.name.c_str(), c.rate_rps);
    rates.push_back(c.rate_rps);
    total += c.rate_rps;
  }
  std::printf("%-24s %12.4f\n", "total", total);
  if (cfg.llms.size() > 1 && total > 0.0)
    std::printf("top 20%% of models carry %.1f%% of the total rate\n",
                100.0 * top_share(rates, 0.2));
  std::printf("wrote %zu requests to %s\n", trace.size(), path.c_str());
  return 0;
}

int run_plan(const ExperimentConfig& cfg, const std::string& backend,
             const std::string& plan_path) {
  std::string path = pick_path(plan_path, cfg.outputs.plan, "plan.json");
  std::string chosen = backend.empty() ? cfg.backend : backend;
  std::vector<LlmEntry> entries = config_entries(cfg);

  PlacementResult result = place(cfg.cluster, entries, cfg.profile, cfg.placement, chosen);
  if (chosen == "ilp") {
    PlacementResult greedy = place(cfg.cluster, entries, cfg.profile, cfg.placement, "greedy");
    double gap = result.objective > 0.0
                     ? (result.objective - greedy.objective) / result.objective
                     : 0.0;
    std::printf("greedy objective %.6g, ilp objective %.6g, gap %.2f%%\n", greedy.objective,
                result.objective, 100.0 * gap);
  }
  write_file(path, placement_to_json(result, entries));

  int used = 0;
  for (const LLMUnit& u : result.units)
    if (!u.llms.empty()) ++used;
  std::printf("placed %zu models on %d units (est. %.4g req/s); wrote %s\n", entries.size(), used,
              result.est_total_tpt, path.c_str());
  return 0;
}

int run_simulate(const ExperimentConfig& cfg, const std::string& plan_path,
                 const std::string& trace_path, const std::string& out_dir) {
  std::vector<LlmEntry> entries = config_entries(cfg);

  PlacementResult plan;
  if (!plan_path.empty()) {
    std::ifstream in(plan_path);
    if (!in) throw ConfigError("cannot open '" + plan_path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    plan = placement_from_json(buf.str(), entries);
    verify_placement(cfg.cluster, entries, plan, cfg.placement);
  } else {
    plan = place(cfg.cluster, entries, cfg.profile, cfg.placement, cfg.backend);
  }

  std::vector<Request> trace =
      trace_path.empty() ? gen_workload(config_workload(cfg)) : load_trace(trace_path);

  std::string dir = pick_path(out_dir, cfg.outputs.dir, "out");
  std::filesystem::create_directories(dir);

  SimOutcome out = simulate_once(cfg, plan, entries, trace, cfg.engine);
  write_records_csv(dir + "/records.csv", out.sim.records);
  write_file(dir + "/metrics.json", report_to_json(out.report, out.sim.units));
  write_file(dir + "/poolstats.json", poolstats_json(out.sim.units));

  std::printf("scheduler %s: %zu requests, aggregated throughput %.6g req/s\n",
              sched_name(cfg.engine.scheduler), out.sim.records.size(),
              out.report.aggregated_throughput_rps);
  std::printf("wrote %s/records.csv, %s/metrics.json, %s/poolstats.json\n", dir.c_str(),
              dir.c_str(), dir.c_str());
  return 0;
}

int run_ablate(const ExperimentConfig& cfg, const std::string& sweep_path) {
  std::string path = pick_path(sweep_path, cfg.outputs.sweep, "sweep.csv");

  std::ostringstream csv;
  csv << "scheduler,rate_scale,aggregated_tpt_rps";
  for (double s : cfg.slo_scales) csv << ",slo_" << fmt("%g", s);
  csv << ",max_r_gap,r_values\n";

  const SchedKind kinds[] = {SchedKind::Fcfs, SchedKind::RoundRobin, SchedKind::Adbs};
  int rows = 0;
  for (double scale : cfg.rate_scales) {
    ExperimentConfig scaled = cfg;
    for (LlmConfig& c : scaled.llms) c.rate_rps *= scale;
    std::vector<LlmEntry> entries = config_entries(scaled);
    std::vector<Request> trace = gen_workload(config_workload(scaled));
    PlacementResult plan =
        place(scaled.cluster, entries, scaled.profile, scaled.placement, scaled.backend);

    for (SchedKind kind : kinds) {
      EngineParams engine = scaled.engine;
      engine.scheduler = kind;
      SimOutcome out = simulate_once(scaled, plan, entries, trace, engine);

      csv << sched_name(kind) << "," << fmt("%g", scale) << ","
          << fmt("%.9g", out.report.aggregated_throughput_rps);
      for (double v : out.report.overall_slo) csv << "," << fmt("%.9g", v);
      csv << "," << fmt("%.9g", max_resource_gap(out.sim.units)) << ",";
      bool first = true;
      for (const UnitStats& u : out.sim.units)
        for (const UnitLlmStats& m : u.llms) {
          if (!first) csv << ";";
          csv << m.llm << "=" << fmt("%.9g", m.resource_usage);
          first = false;
        }
      csv << "\n";
      ++rows;
      log_info("ablate: scheduler " + std::string(sched_name(kind)) + " at scale " +
               fmt("%g", scale) + " done");
    }
  }
  write_file(path, csv.str());
  std::printf("wrote %d sweep rows to %s\n", rows, path.c_str());
  return 0;
}

}  // namespace muxsim
