#include "muxsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace muxsim {

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  if (p <= 0.0 || p > 1.0) throw std::invalid_argument("percentile rank must be in (0, 1]");
  std::sort(values.begin(), values.end());
  auto n = static_cast<double>(values.size());
  auto rank = static_cast<size_t>(std::ceil(p * n));
  return values[rank - 1];
}

double slo_reference_latency_ms(const LLMSpec& spec, const LatencyProfile& prof, int tp_degree,
                                int prompt_len, int output_len) {
  ExecConfig cfg{tp_degree, 1.0};
  double t = prefill_latency(spec, prof, cfg, 1, prompt_len);
  for (int k = 1; k < output_len; ++k) t += decode_step_latency(spec, prof, cfg, 1, prompt_len + k);
  return t;
}

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double p99_of(const std::vector<double>& v) { return v.empty() ? 0.0 : percentile(v, 0.99); }

}  // namespace

MetricsReport compute_metrics(const std::vector<RequestRecord>& records,
                              const std::vector<MetricsLlmInput>& llms, double horizon_s,
                              const std::vector<double>& slo_scales, const LatencyProfile& prof,
                              bool slo_reference_tp_one) {
  if (horizon_s <= 0.0) throw std::invalid_argument("horizon must be positive");
  MetricsReport report;
  report.horizon_s = horizon_s;
  report.slo_scales = slo_scales;
  report.overall_slo.assign(slo_scales.size(), 0.0);

  double total_rate = 0.0;
  for (const MetricsLlmInput& in : llms) total_rate += in.rate;

  std::vector<std::int64_t> overall_met(slo_scales.size(), 0);
  std::int64_t overall_total = 0;

  for (const MetricsLlmInput& in : llms) {
    if (in.spec == nullptr) throw std::invalid_argument("metrics input without a model spec");
    LlmMetrics m;
    m.name = in.name;
    m.rate = in.rate;
    m.slo_attainment.assign(slo_scales.size(), 0.0);

    std::vector<double> ttft, tpot, latency;
    std::vector<std::int64_t> met(slo_scales.size(), 0);
    std::int64_t total = 0;
    int tp_ref = slo_reference_tp_one ? 1 : in.tp_degree;

    for (const RequestRecord& r : records) {
      if (r.llm != in.name) continue;
      total += 1;
      if (r.done_s <= horizon_s) m.completed += 1;
      ttft.push_back(r.first_token_s - r.arrival_s);
      if (r.output_len > 1)
        tpot.push_back((r.done_s - r.first_token_s) / static_cast<double>(r.output_len - 1));
      double e2e = r.done_s - r.arrival_s;
      latency.push_back(e2e / static_cast<double>(r.output_len));
      double ref_s =
          slo_reference_latency_ms(*in.spec, prof, tp_ref, r.prompt_len, r.output_len) / 1000.0;
      for (size_t si = 0; si < slo_scales.size(); ++si)
        if (e2e <= slo_scales[si] * ref_s * (1.0 + 1e-9)) met[si] += 1;
    }

    m.throughput_rps = static_cast<double>(m.completed) / horizon_s;
    m.mean_ttft_s = mean_of(ttft);
    m.p99_ttft_s = p99_of(ttft);
    m.mean_tpot_s = mean_of(tpot);
    m.p99_tpot_s = p99_of(tpot);
    m.mean_latency_s = mean_of(latency);
    m.p99_latency_s = p99_of(latency);
    for (size_t si = 0; si < slo_scales.size(); ++si) {
      if (total > 0)
        m.slo_attainment[si] = static_cast<double>(met[si]) / static_cast<double>(total);
      overall_met[si] += met[si];
    }
    overall_total += total;

    double weight = total_rate > 0.0 ? in.rate / total_rate : 0.0;
    report.aggregated_throughput_rps += weight * m.throughput_rps;
    report.llms.push_back(std::move(m));
  }

  for (size_t si = 0; si < slo_scales.size(); ++si)
    if (overall_total > 0)
      report.overall_slo[si] =
          static_cast<double>(overall_met[si]) / static_cast<double>(overall_total);
  return report;
}

double max_resource_gap(const std::vector<UnitStats>& units) {
  std::vector<double> rs;
  for (const UnitStats& u : units)
    for (const UnitLlmStats& m : u.llms)
      if (m.rate > 0.0) rs.push_back(m.resource_usage);
  double gap = 0.0;
  for (size_t i = 0; i < rs.size(); ++i)
    for (size_t j = i + 1; j < rs.size(); ++j) gap = std::max(gap, std::abs(rs[i] - rs[j]));
  return gap;
}

std::string report_to_json(const MetricsReport& report, const std::vector<UnitStats>& units) {
  nlohmann::ordered_json j;
  j["horizon_s"] = report.horizon_s;
  j["aggregated_throughput_rps"] = report.aggregated_throughput_rps;
  j["slo_scales"] = report.slo_scales;
  j["overall_slo_attainment"] = report.overall_slo;
  j["max_resource_gap"] = max_resource_gap(units);

  nlohmann::ordered_json models = nlohmann::ordered_json::array();
  for (const LlmMetrics& m : report.llms) {
    nlohmann::ordered_json e;
    e["name"] = m.name;
    e["rate_rps"] = m.rate;
    e["completed"] = m.completed;
    e["throughput_rps"] = m.throughput_rps;
    e["mean_ttft_s"] = m.mean_ttft_s;
    e["p99_ttft_s"] = m.p99_ttft_s;
    e["mean_tpot_s"] = m.mean_tpot_s;
    e["p99_tpot_s"] = m.p99_tpot_s;
    e["mean_latency_s"] = m.mean_latency_s;
    e["p99_latency_s"] = m.p99_latency_s;
    e["slo_attainment"] = m.slo_attainment;
    models.push_back(std::move(e));
  }
  j["models"] = std::move(models);

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
    ju.push_back(std::move(e));
  }
  j["units"] = std::move(ju);
  return j.dump(2) + "\n";
}

}  // namespace muxsim
