#pragma once

#include <string>
#include <vector>

#include "muxsim/config.hpp"
#include "muxsim/placement.hpp"

namespace muxsim {

// Subcommand bodies. Paths given on the command line win over the config's
// outputs section; each returns a process exit code (0 on success) and
// signals failures with exceptions mapped by the entry point.
int run_gen_workload(const ExperimentConfig& cfg, const std::string& trace_path);
int run_plan(const ExperimentConfig& cfg, const std::string& backend, const std::string& plan_path);
int run_simulate(const ExperimentConfig& cfg, const std::string& plan_path,
                 const std::string& trace_path, const std::string& out_dir);
int run_ablate(const ExperimentConfig& cfg, const std::string& sweep_path);

// plan.json round trip; parsing re-verifies the placement against the config.
std::string placement_to_json(const PlacementResult& result, const std::vector<LlmEntry>& entries);
PlacementResult placement_from_json(const std::string& text, const std::vector<LlmEntry>& entries);

}  // namespace muxsim
