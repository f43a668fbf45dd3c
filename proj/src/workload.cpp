#include "muxsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace muxsim {

LengthDist LengthDist::constant(double value) {
  if (!(value >= 1.0)) throw std::invalid_argument("length dist: constant value must be >= 1");
  LengthDist d;
  d.dist_ = Constant{value};
  return d;
}

LengthDist LengthDist::lognormal(double mean, double sigma) {
  if (!(mean >= 1.0)) throw std::invalid_argument("length dist: lognormal mean must be >= 1");
  if (!(sigma >= 0.0)) throw std::invalid_argument("length dist: sigma must be >= 0");
  LengthDist d;
  d.dist_ = Lognormal{mean, sigma};
  return d;
}

LengthDist LengthDist::empirical(std::vector<double> values, std::vector<double> weights) {
  if (values.empty() || values.size() != weights.size())
    throw std::invalid_argument("length dist: empirical values/weights must be non-empty and equal length");
  double total = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] >= 1.0)) throw std::invalid_argument("length dist: empirical values must be >= 1");
    if (!(weights[i] >= 0.0)) throw std::invalid_argument("length dist: empirical weights must be >= 0");
    total += weights[i];
  }
  if (!(total > 0.0)) throw std::invalid_argument("length dist: empirical weights must not all be zero");
  LengthDist d;
  d.dist_ = Empirical{std::move(values), std::move(weights)};
  return d;
}

int LengthDist::sample(Rng& rng) const {
  double x = 1.0;
  if (const auto* c = std::get_if<Constant>(&dist_)) {
    x = c->value;
  } else if (const auto* l = std::get_if<Lognormal>(&dist_)) {
    x = rng.lognormal_mean(l->mean, l->sigma);
  } else {
    const auto& e = std::get<Empirical>(dist_);
    double total = std::accumulate(e.weights.begin(), e.weights.end(), 0.0);
    double u = rng.uniform01() * total;
    size_t pick = e.values.size() - 1;
    for (size_t i = 0; i < e.weights.size(); ++i) {
      if (u < e.weights[i]) {
        pick = i;
        break;
      }
      u -= e.weights[i];
    }
    x = e.values[pick];
  }
  return static_cast<int>(std::max<std::int64_t>(1, llround(x)));
}

double LengthDist::mean() const {
  if (const auto* c = std::get_if<Constant>(&dist_)) return c->value;
  if (const auto* l = std::get_if<Lognormal>(&dist_)) return l->mean;
  const auto& e = std::get<Empirical>(dist_);
  double total = 0.0, acc = 0.0;
  for (size_t i = 0; i < e.values.size(); ++i) {
    total += e.weights[i];
    acc += e.values[i] * e.weights[i];
  }
  return acc / total;
}

std::vector<double> gen_rates(int n_llms, double alpha, double max_rate) {
  if (n_llms < 1) throw std::invalid_argument("gen_rates: n_llms must be >= 1");
  if (!(alpha >= 0.0)) throw std::invalid_argument("gen_rates: alpha must be >= 0");
  if (!(max_rate > 0.0)) throw std::invalid_argument("gen_rates: max_rate must be positive");
  std::vector<double> rates(n_llms);
  for (int i = 0; i < n_llms; ++i)
    rates[i] = max_rate * std::pow(static_cast<double>(i + 1), -alpha);
  return rates;
}

double top_share(const std::vector<double>& rates, double fraction) {
  if (rates.empty()) throw std::invalid_argument("top_share: rates must not be empty");
  std::vector<double> sorted = rates;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  auto k = std::max<std::int64_t>(1, llround(fraction * static_cast<double>(sorted.size())));
  k = std::min<std::int64_t>(k, static_cast<std::int64_t>(sorted.size()));
  double total = std::accumulate(sorted.begin(), sorted.end(), 0.0);
  double top = std::accumulate(sorted.begin(), sorted.begin() + k, 0.0);
  return total > 0.0 ? top / total : 0.0;
}

std::vector<double> gen_arrivals(double rate, double horizon_s, Rng& rng) {
  if (!(rate >= 0.0)) throw std::invalid_argument("gen_arrivals: rate must be >= 0");
  if (!(horizon_s >= 0.0)) throw std::invalid_argument("gen_arrivals: horizon must be >= 0");
  std::vector<double> arrivals;
  if (rate == 0.0) return arrivals;
  double t = 0.0;
  while (true) {
    t += rng.exponential(rate);
    if (t >= horizon_s) break;
    arrivals.push_back(t);
  }
  return arrivals;
}

std::vector<Request> gen_workload(const WorkloadSpec& spec) {
  if (!(spec.horizon_s >= 0.0)) throw std::invalid_argument("gen_workload: horizon must be >= 0");
  std::vector<Request> trace;
  for (const LlmWorkload& lw : spec.llms) {
    if (lw.llm.empty()) throw std::invalid_argument("gen_workload: llm name must not be empty");
    Rng arr(spec.seed, "arrivals:" + lw.llm);
    Rng prompt(spec.seed, "prompt:" + lw.llm);
    Rng output(spec.seed, "output:" + lw.llm);
    for (double t : gen_arrivals(lw.rate, spec.horizon_s, arr)) {
      Request r;
      r.llm = lw.llm;
      r.arrival_s = t;
      r.prompt_len = lw.prompt_len.sample(prompt);
      r.output_len = lw.output_len.sample(output);
      trace.push_back(std::move(r));
    }
  }
  std::stable_sort(trace.begin(), trace.end(), [](const Request& a, const Request& b) {
    if (a.arrival_s != b.arrival_s) return a.arrival_s < b.arrival_s;
    return a.llm < b.llm;
  });
  for (size_t i = 0; i < trace.size(); ++i) trace[i].id = static_cast<std::int64_t>(i);
  return trace;
}

void save_trace(const std::vector<Request>& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_trace: cannot open '" + path + "' for writing");
  out << "id,llm,arrival_s,prompt_len,output_len\n";
  char buf[64];
  for (const Request& r : trace) {
    std::snprintf(buf, sizeof(buf), "%.17g", r.arrival_s);
    out << r.id << ',' << r.llm << ',' << buf << ',' << r.prompt_len << ',' << r.output_len
        << '\n';
  }
  if (!out) throw std::runtime_error("save_trace: write to '" + path + "' failed");
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

[[noreturn]] void trace_error(const std::string& path, size_t line_no, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace

std::vector<Request> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_trace: cannot open '" + path + "'");
  std::vector<Request> trace;
  std::string line;
  size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != "id,llm,arrival_s,prompt_len,output_len")
        trace_error(path, line_no, "expected header 'id,llm,arrival_s,prompt_len,output_len'");
      saw_header = true;
      continue;
    }
    std::vector<std::string> f = split_fields(line);
    if (f.size() != 5) trace_error(path, line_no, "expected 5 fields, got " + std::to_string(f.size()));
    Request r;
    try {
      size_t pos = 0;
      r.id = std::stoll(f[0], &pos);
      if (pos != f[0].size()) throw std::invalid_argument("id");
      r.llm = f[1];
      r.arrival_s = std::stod(f[2], &pos);
      if (pos != f[2].size()) throw std::invalid_argument("arrival_s");
      r.prompt_len = std::stoi(f[3], &pos);
      if (pos != f[3].size()) throw std::invalid_argument("prompt_len");
      r.output_len = std::stoi(f[4], &pos);
      if (pos != f[4].size()) throw std::invalid_argument("output_len");
    } catch (const std::exception&) {
      trace_error(path, line_no, "malformed row '" + line + "'");
    }
    if (r.llm.empty()) trace_error(path, line_no, "empty llm name");
    if (!(r.arrival_s >= 0.0)) trace_error(path, line_no, "arrival_s must be >= 0");
    if (r.prompt_len < 1 || r.output_len < 1)
      trace_error(path, line_no, "prompt_len and output_len must be >= 1");
    trace.push_back(std::move(r));
  }
  return trace;
}

}  // namespace muxsim
