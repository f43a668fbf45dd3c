#pragma once

#include <vector>

namespace muxsim {

/*
 * Assignment program over one-hot placement variables x[i][j] (model i on
 * mesh j):
 *
 *   maximize   sum_i value[i][j] * x[i][j]
 *   subject to sum_j x[i][j] = 1                      for every model i
 *              sum_i sm_need[i][j] * x[i][j] <= sm_cap[j]
 *              sum_i mem_need[i][j] * x[i][j] <= mem_cap[j]
 *              x[i][j] = 0 where not allowed[i][j]
 */
struct IlpInstance {
  int n_llms = 0;
  int n_meshes = 0;
  std::vector<std::vector<double>> value;     // [llm][mesh]
  std::vector<std::vector<char>> allowed;     // [llm][mesh]
  std::vector<std::vector<double>> sm_need;   // [llm][mesh]
  std::vector<std::vector<double>> mem_need;  // [llm][mesh]
  std::vector<double> sm_cap;                 // [mesh]
  std::vector<double> mem_cap;                // [mesh]

  void validate() const;
};

struct IlpSolution {
  bool feasible = false;
  double objective = 0.0;
  std::vector<int> assign;  // [llm] -> mesh index
};

// Objective of a full assignment, checking capacities; infeasible
// assignments report feasible=false.
IlpSolution score_assignment(const IlpInstance& inst, const std::vector<int>& assign);

// Exact branch-and-bound over the one-hot variables. Deterministic: models
// are branched in decreasing value spread, children visited in decreasing
// value, and only strict improvements replace the incumbent. Instances with
// n_llms * n_meshes binary dimensions above max_dims are refused.
IlpSolution solve_ilp(const IlpInstance& inst, int max_dims = 20);

// Reference oracle: full enumeration of all n_meshes^n_llms assignments.
IlpSolution brute_force_ilp(const IlpInstance& inst);

}  // namespace muxsim
