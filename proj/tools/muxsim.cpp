#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "muxsim/commands.hpp"
#include "muxsim/log.hpp"

// Exit codes: 0 success, 1 usage or config error, 2 infeasible placement,
// 3 internal failure.
int main(int argc, char** argv) {
  CLI::App app{"Planner and deterministic simulator for serving several LLMs on one GPU cluster"};
  app.require_subcommand(1);

  std::string cfg_path, output, backend, plan_path, trace_path;

  CLI::App* gen = app.add_subcommand("gen-workload", "Generate a Poisson request trace");
  gen->add_option("-c,--config", cfg_path, "Experiment config (JSON)")->required();
  gen->add_option("-o,--output", output, "Trace CSV path (default trace.csv)");

  CLI::App* plan = app.add_subcommand("plan", "Compute a placement plan");
  plan->add_option("-c,--config", cfg_path, "Experiment config (JSON)")->required();
  plan->add_option("--backend", backend, "Placement backend: greedy or ilp");
  plan->add_option("-o,--output", output, "Plan JSON path (default plan.json)");

  CLI::App* sim = app.add_subcommand("simulate", "Run one simulation and write reports");
  sim->add_option("-c,--config", cfg_path, "Experiment config (JSON)")->required();
  sim->add_option("-p,--plan", plan_path, "Plan JSON (default: computed from the config)");
  sim->add_option("-t,--trace", trace_path, "Trace CSV (default: generated from the config)");
  sim->add_option("-o,--output", output, "Output directory (default out/)");

  CLI::App* ablate = app.add_subcommand("ablate", "Sweep schedulers across rate scales");
  ablate->add_option("-c,--config", cfg_path, "Experiment config (JSON)")->required();
  ablate->add_option("-o,--output", output, "Sweep CSV path (default sweep.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    muxsim::ExperimentConfig cfg = muxsim::load_config(cfg_path);
    if (gen->parsed()) return muxsim::run_gen_workload(cfg, output);
    if (plan->parsed()) return muxsim::run_plan(cfg, backend, output);
    if (sim->parsed()) return muxsim::run_simulate(cfg, plan_path, trace_path, output);
    if (ablate->parsed()) return muxsim::run_ablate(cfg, output);
    std::fprintf(stderr, "no subcommand given\n");
    return 1;
  } catch (const muxsim::InfeasibleError& e) {
    muxsim::log_error(e.what());
    return 2;
  } catch (const muxsim::ConfigError& e) {
    muxsim::log_error(e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    muxsim::log_error(e.what());
    return 1;
  } catch (const std::exception& e) {
    muxsim::log_error(std::string("internal error: ") + e.what());
    return 3;
  }
}
