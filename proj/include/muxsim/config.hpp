#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "muxsim/cost_model.hpp"
#include "muxsim/placement.hpp"
#include "muxsim/sim_engine.hpp"
#include "muxsim/workload.hpp"

namespace muxsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Built-in architectures by size bucket. Weight sizes assume 16-bit params.
const std::map<std::string, LLMSpec>& model_catalog();

struct LlmConfig {
  std::string name;
  std::string model;  // catalog bucket: 7b, 13b, 30b, 65b
  double rate_rps = 0.0;
  LengthDist prompt_len = LengthDist::constant(128);
  LengthDist output_len = LengthDist::constant(64);
};

// Optional popularity override: reassigns rates max_rate * rank^(-alpha)
// to the models in their listed order.
struct PowerLawConfig {
  bool enabled = false;
  double alpha = 0.9;
  double max_rate_rps = 1.0;
};

struct OutputPaths {
  std::string trace;
  std::string plan;
  std::string dir;
  std::string sweep;
};

/*
 * One JSON file drives every subcommand. Sections: cluster, llms, workload,
 * placement, profile, sim, metrics, ablate, outputs — all but cluster and
 * llms optional. Unknown keys anywhere are rejected.
 */
struct ExperimentConfig {
  Cluster cluster;
  std::vector<LlmConfig> llms;
  double horizon_s = 60.0;
  std::uint64_t seed = 0;
  PowerLawConfig power_law;
  std::string backend = "greedy";
  PlacementParams placement;
  LatencyProfile profile;
  EngineParams engine;
  bool slo_reference_tp_one = false;
  std::vector<double> slo_scales = {1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<double> rate_scales = {0.25, 0.5, 1.0, 2.0, 4.0};
  OutputPaths outputs;
};

ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);

// Catalog lookup plus workload means, with the config's serving names.
std::vector<LlmEntry> config_entries(const ExperimentConfig& cfg);

// The trace generator's view of the config (post power-law rates).
WorkloadSpec config_workload(const ExperimentConfig& cfg);

}  // namespace muxsim
