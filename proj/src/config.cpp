#include "muxsim/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace muxsim {

const std::map<std::string, LLMSpec>& model_catalog() {
  static const std::map<std::string, LLMSpec> catalog = [] {
    std::map<std::string, LLMSpec> m;
    m["7b"] = {"7b", 32, 32, 128, 4096, static_cast<std::int64_t>(13.5e9), 2};
    m["13b"] = {"13b", 40, 40, 128, 5120, static_cast<std::int64_t>(26e9), 2};
    m["30b"] = {"30b", 60, 52, 128, 6656, static_cast<std::int64_t>(65e9), 2};
    m["65b"] = {"65b", 80, 64, 128, 8192, static_cast<std::int64_t>(130e9), 2};
    return m;
  }();
  return catalog;
}

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw ConfigError("config: " + msg); }

void check_keys(const json& obj, const std::string& ctx, std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        known = true;
        break;
      }
    if (!known) fail("unknown key '" + it.key() + "' in " + ctx);
  }
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

const json& req(const json& obj, const std::string& ctx, const char* key) {
  const json* v = find(obj, key);
  if (!v) fail(ctx + " is missing required key '" + key + "'");
  return *v;
}

double as_num(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + " must be a number");
  return v.get<double>();
}

double req_num(const json& obj, const std::string& ctx, const char* key) {
  return as_num(req(obj, ctx, key), ctx + "." + key);
}

double opt_num(const json& obj, const std::string& ctx, const char* key, double def) {
  const json* v = find(obj, key);
  return v ? as_num(*v, ctx + "." + std::string(key)) : def;
}

std::int64_t as_int(const json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where + " must be an integer");
  return v.get<std::int64_t>();
}

std::int64_t req_int(const json& obj, const std::string& ctx, const char* key) {
  return as_int(req(obj, ctx, key), ctx + "." + key);
}

std::int64_t opt_int(const json& obj, const std::string& ctx, const char* key, std::int64_t def) {
  const json* v = find(obj, key);
  return v ? as_int(*v, ctx + "." + std::string(key)) : def;
}

std::string req_str(const json& obj, const std::string& ctx, const char* key) {
  const json& v = req(obj, ctx, key);
  if (!v.is_string()) fail(ctx + "." + key + " must be a string");
  return v.get<std::string>();
}

std::string opt_str(const json& obj, const std::string& ctx, const char* key,
                    const std::string& def) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_string()) fail(ctx + "." + std::string(key) + " must be a string");
  return v->get<std::string>();
}

bool opt_bool(const json& obj, const std::string& ctx, const char* key, bool def) {
  const json* v = find(obj, key);
  if (!v) return def;
  if (!v->is_boolean()) fail(ctx + "." + std::string(key) + " must be a boolean");
  return v->get<bool>();
}

std::vector<double> num_list(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where + " must be an array of numbers");
  std::vector<double> out;
  for (const json& e : v) out.push_back(as_num(e, where + " element"));
  return out;
}

LengthDist parse_dist(const json& v, const std::string& ctx) {
  if (!v.is_object()) fail(ctx + " must be an object with a 'kind'");
  std::string kind = req_str(v, ctx, "kind");
  if (kind == "constant") {
    check_keys(v, ctx, {"kind", "value"});
    return LengthDist::constant(req_num(v, ctx, "value"));
  }
  if (kind == "lognormal") {
    check_keys(v, ctx, {"kind", "mean", "sigma"});
    return LengthDist::lognormal(req_num(v, ctx, "mean"), opt_num(v, ctx, "sigma", 0.8));
  }
  if (kind == "empirical") {
    check_keys(v, ctx, {"kind", "values", "weights"});
    return LengthDist::empirical(num_list(req(v, ctx, "values"), ctx + ".values"),
                                 num_list(req(v, ctx, "weights"), ctx + ".weights"));
  }
  fail(ctx + ".kind must be constant, lognormal, or empirical");
}

SchedKind parse_scheduler(const std::string& s, const std::string& ctx) {
  if (s == "adbs") return SchedKind::Adbs;
  if (s == "fcfs") return SchedKind::Fcfs;
  if (s == "round_robin") return SchedKind::RoundRobin;
  fail(ctx + " must be adbs, fcfs, or round_robin");
}

void parse_cluster(const json& v, Cluster& out) {
  check_keys(v, "cluster", {"num_nodes", "gpus_per_node", "gpu_memory_gb"});
  out.num_nodes = static_cast<int>(req_int(v, "cluster", "num_nodes"));
  out.gpus_per_node = static_cast<int>(req_int(v, "cluster", "gpus_per_node"));
  double gb = req_num(v, "cluster", "gpu_memory_gb");
  if (gb <= 0.0) fail("cluster.gpu_memory_gb must be positive");
  out.gpu_memory_bytes = static_cast<std::int64_t>(std::llround(gb * 1073741824.0));
}

void parse_llms(const json& v, std::vector<LlmConfig>& out) {
  if (!v.is_array() || v.empty()) fail("llms must be a non-empty array");
  std::set<std::string> seen;
  for (size_t i = 0; i < v.size(); ++i) {
    const json& e = v[i];
    std::string ctx = "llms[" + std::to_string(i) + "]";
    if (!e.is_object()) fail(ctx + " must be an object");
    check_keys(e, ctx, {"name", "model", "rate_rps", "prompt_len", "output_len"});
    LlmConfig c;
    c.name = req_str(e, ctx, "name");
    if (c.name.empty() || c.name.find(',') != std::string::npos)
      fail(ctx + ".name must be non-empty and comma-free");
    if (!seen.insert(c.name).second) fail("duplicate model name '" + c.name + "'");
    c.model = req_str(e, ctx, "model");
    if (!model_catalog().count(c.model))
      fail(ctx + ".model '" + c.model + "' is not in the catalog (7b, 13b, 30b, 65b)");
    c.rate_rps = opt_num(e, ctx, "rate_rps", 0.0);
    if (c.rate_rps < 0.0) fail(ctx + ".rate_rps must be >= 0");
    if (const json* d = find(e, "prompt_len")) c.prompt_len = parse_dist(*d, ctx + ".prompt_len");
    if (const json* d = find(e, "output_len")) c.output_len = parse_dist(*d, ctx + ".output_len");
    out.push_back(std::move(c));
  }
}

void parse_workload(const json& v, ExperimentConfig& cfg) {
  check_keys(v, "workload", {"horizon_s", "seed", "power_law"});
  cfg.horizon_s = opt_num(v, "workload", "horizon_s", cfg.horizon_s);
  if (cfg.horizon_s <= 0.0) fail("workload.horizon_s must be positive");
  std::int64_t seed = opt_int(v, "workload", "seed", 0);
  if (seed < 0) fail("workload.seed must be >= 0");
  cfg.seed = static_cast<std::uint64_t>(seed);
  if (const json* p = find(v, "power_law")) {
    check_keys(*p, "workload.power_law", {"alpha", "max_rate_rps"});
    cfg.power_law.enabled = true;
    cfg.power_law.alpha = req_num(*p, "workload.power_law", "alpha");
    cfg.power_law.max_rate_rps = req_num(*p, "workload.power_law", "max_rate_rps");
    if (cfg.power_law.alpha < 0.0) fail("workload.power_law.alpha must be >= 0");
    if (cfg.power_law.max_rate_rps <= 0.0) fail("workload.power_law.max_rate_rps must be positive");
  }
}

void parse_placement(const json& v, ExperimentConfig& cfg) {
  check_keys(v, "placement", {"backend", "sm_list", "tp_list", "max_batch", "max_ilp_dims"});
  cfg.backend = opt_str(v, "placement", "backend", cfg.backend);
  if (cfg.backend != "greedy" && cfg.backend != "ilp")
    fail("placement.backend must be greedy or ilp");
  if (const json* l = find(v, "sm_list")) cfg.placement.sm_list = num_list(*l, "placement.sm_list");
  if (const json* l = find(v, "tp_list")) {
    cfg.placement.tp_list.clear();
    for (double x : num_list(*l, "placement.tp_list"))
      cfg.placement.tp_list.push_back(static_cast<int>(x));
  }
  cfg.placement.max_batch =
      static_cast<int>(opt_int(v, "placement", "max_batch", cfg.placement.max_batch));
  cfg.placement.max_ilp_dims =
      static_cast<int>(opt_int(v, "placement", "max_ilp_dims", cfg.placement.max_ilp_dims));
}

void parse_profile(const json& v, LatencyProfile& p) {
  check_keys(v, "profile",
             {"prefill_ms_per_token", "decode_base_ms", "decode_ctx_ms_per_token", "tp_efficiency",
              "sm_saturation_point", "batch_knee", "reference_scale"});
  p.prefill_ms_per_token = opt_num(v, "profile", "prefill_ms_per_token", p.prefill_ms_per_token);
  p.decode_base_ms = opt_num(v, "profile", "decode_base_ms", p.decode_base_ms);
  p.decode_ctx_ms_per_token =
      opt_num(v, "profile", "decode_ctx_ms_per_token", p.decode_ctx_ms_per_token);
  p.tp_efficiency = opt_num(v, "profile", "tp_efficiency", p.tp_efficiency);
  p.sm_saturation_point = opt_num(v, "profile", "sm_saturation_point", p.sm_saturation_point);
  p.batch_knee = opt_num(v, "profile", "batch_knee", p.batch_knee);
  p.reference_scale = opt_num(v, "profile", "reference_scale", p.reference_scale);
}

void parse_sim(const json& v, ExperimentConfig& cfg, bool* decode_sm_set) {
  check_keys(v, "sim",
             {"scheduler", "kappa", "quota_period_s", "token_budget", "block_tokens", "warmup_s",
              "decode_sm", "prefill_min_sm", "activation_reserve_frac", "quota_floor_frac",
              "quota_low_mark", "quota_high_mark", "quota_step_frac", "slo_reference_tp_one"});
  EngineParams& e = cfg.engine;
  if (const json* s = find(v, "scheduler"))
    e.scheduler = parse_scheduler(s->is_string() ? s->get<std::string>() : "", "sim.scheduler");
  e.kappa = opt_num(v, "sim", "kappa", e.kappa);
  e.quota_period_s = opt_num(v, "sim", "quota_period_s", e.quota_period_s);
  e.token_budget = opt_int(v, "sim", "token_budget", e.token_budget);
  e.block_tokens = static_cast<int>(opt_int(v, "sim", "block_tokens", e.block_tokens));
  e.warmup_s = opt_num(v, "sim", "warmup_s", e.warmup_s);
  if (const json* d = find(v, "decode_sm")) {
    e.decode_sm = as_num(*d, "sim.decode_sm");
    *decode_sm_set = true;
  }
  e.prefill_min_sm = opt_num(v, "sim", "prefill_min_sm", e.prefill_min_sm);
  e.activation_reserve_frac =
      opt_num(v, "sim", "activation_reserve_frac", e.activation_reserve_frac);
  e.quota_floor_frac = opt_num(v, "sim", "quota_floor_frac", e.quota_floor_frac);
  e.adapt.low_mark = opt_num(v, "sim", "quota_low_mark", e.adapt.low_mark);
  e.adapt.high_mark = opt_num(v, "sim", "quota_high_mark", e.adapt.high_mark);
  e.adapt.step_frac = opt_num(v, "sim", "quota_step_frac", e.adapt.step_frac);
  cfg.slo_reference_tp_one =
      opt_bool(v, "sim", "slo_reference_tp_one", cfg.slo_reference_tp_one);
  if (e.kappa < 0.0) fail("sim.kappa must be >= 0");
  if (e.quota_period_s <= 0.0) fail("sim.quota_period_s must be positive");
  if (e.token_budget < 1) fail("sim.token_budget must be >= 1");
  if (e.block_tokens < 1) fail("sim.block_tokens must be >= 1");
  if (e.warmup_s < 0.0) fail("sim.warmup_s must be >= 0");
  if (e.decode_sm <= 0.0 || e.decode_sm > 1.0) fail("sim.decode_sm must be in (0, 1]");
  if (e.prefill_min_sm <= 0.0 || e.prefill_min_sm > 1.0)
    fail("sim.prefill_min_sm must be in (0, 1]");
  if (e.activation_reserve_frac < 0.0 || e.activation_reserve_frac >= 1.0)
    fail("sim.activation_reserve_frac must be in [0, 1)");
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("top level must be an object");
  check_keys(root, "config",
             {"cluster", "llms", "workload", "placement", "profile", "sim", "metrics", "ablate",
              "outputs"});

  ExperimentConfig cfg;
  parse_cluster(req(root, "config", "cluster"), cfg.cluster);
  parse_llms(req(root, "config", "llms"), cfg.llms);
  if (const json* v = find(root, "workload")) parse_workload(*v, cfg);
  if (const json* v = find(root, "placement")) parse_placement(*v, cfg);
  if (const json* v = find(root, "profile")) parse_profile(*v, cfg.profile);

  bool decode_sm_set = false;
  if (const json* v = find(root, "sim")) parse_sim(*v, cfg, &decode_sm_set);
  if (!decode_sm_set) cfg.engine.decode_sm = cfg.profile.sm_saturation_point;

  if (const json* v = find(root, "metrics")) {
    check_keys(*v, "metrics", {"slo_scales"});
    if (const json* s = find(*v, "slo_scales")) {
      cfg.slo_scales = num_list(*s, "metrics.slo_scales");
      if (cfg.slo_scales.empty()) fail("metrics.slo_scales must be non-empty");
      for (double x : cfg.slo_scales)
        if (x <= 0.0) fail("metrics.slo_scales entries must be positive");
    }
  }
  if (const json* v = find(root, "ablate")) {
    check_keys(*v, "ablate", {"rate_scales"});
    if (const json* s = find(*v, "rate_scales")) {
      cfg.rate_scales = num_list(*s, "ablate.rate_scales");
      if (cfg.rate_scales.empty()) fail("ablate.rate_scales must be non-empty");
      for (double x : cfg.rate_scales)
        if (x <= 0.0) fail("ablate.rate_scales entries must be positive");
    }
  }
  if (const json* v = find(root, "outputs")) {
    check_keys(*v, "outputs", {"trace", "plan", "dir", "sweep"});
    cfg.outputs.trace = opt_str(*v, "outputs", "trace", "");
    cfg.outputs.plan = opt_str(*v, "outputs", "plan", "");
    cfg.outputs.dir = opt_str(*v, "outputs", "dir", "");
    cfg.outputs.sweep = opt_str(*v, "outputs", "sweep", "");
  }

  // Placement and the engine share one memory-reserve knob.
  cfg.placement.activation_reserve_frac = cfg.engine.activation_reserve_frac;

  try {
    cfg.cluster.validate();
    cfg.profile.validate();
  } catch (const std::invalid_argument& e) {
    fail(e.what());
  }

  if (cfg.power_law.enabled) {
    std::vector<double> rates =
        gen_rates(static_cast<int>(cfg.llms.size()), cfg.power_law.alpha, cfg.power_law.max_rate_rps);
    for (size_t i = 0; i < cfg.llms.size(); ++i) cfg.llms[i].rate_rps = rates[i];
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::vector<LlmEntry> config_entries(const ExperimentConfig& cfg) {
  std::vector<LlmEntry> out;
  for (const LlmConfig& c : cfg.llms) {
    LlmEntry e;
    e.spec = model_catalog().at(c.model);
    e.spec.name = c.name;
    e.rate = c.rate_rps;
    e.mean_prompt_tokens = c.prompt_len.mean();
    e.mean_output_tokens = c.output_len.mean();
    out.push_back(std::move(e));
  }
  return out;
}

WorkloadSpec config_workload(const ExperimentConfig& cfg) {
  WorkloadSpec spec;
  spec.horizon_s = cfg.horizon_s;
  spec.seed = cfg.seed;
  for (const LlmConfig& c : cfg.llms)
    spec.llms.push_back({c.name, c.rate_rps, c.prompt_len, c.output_len});
  return spec;
}

}  // namespace muxsim
