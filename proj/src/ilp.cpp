#include "muxsim/ilp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace muxsim {

namespace {
constexpr double kEps = 1e-9;
}

void IlpInstance::validate() const {
  if (n_llms < 1 || n_meshes < 1)
    throw std::invalid_argument("ilp instance: need at least one llm and one mesh");
  auto check = [&](const auto& m, const char* what) {
    if (static_cast<int>(m.size()) != n_llms)
      throw std::invalid_argument(std::string("ilp instance: bad row count in ") + what);
    for (const auto& row : m)
      if (static_cast<int>(row.size()) != n_meshes)
        throw std::invalid_argument(std::string("ilp instance: bad column count in ") + what);
  };
  check(value, "value");
  check(allowed, "allowed");
  check(sm_need, "sm_need");
  check(mem_need, "mem_need");
  if (static_cast<int>(sm_cap.size()) != n_meshes || static_cast<int>(mem_cap.size()) != n_meshes)
    throw std::invalid_argument("ilp instance: bad capacity vector length");
}

IlpSolution score_assignment(const IlpInstance& inst, const std::vector<int>& assign) {
  inst.validate();
  if (static_cast<int>(assign.size()) != inst.n_llms)
    throw std::invalid_argument("score_assignment: assignment length mismatch");
  std::vector<double> sm_left = inst.sm_cap;
  std::vector<double> mem_left = inst.mem_cap;
  IlpSolution sol;
  sol.assign = assign;
  for (int i = 0; i < inst.n_llms; ++i) {
    int j = assign[i];
    if (j < 0 || j >= inst.n_meshes) return sol;
    if (!inst.allowed[i][j]) return sol;
    sm_left[j] -= inst.sm_need[i][j];
    mem_left[j] -= inst.mem_need[i][j];
    if (sm_left[j] < -kEps || mem_left[j] < -kEps) return sol;
    sol.objective += inst.value[i][j];
  }
  sol.feasible = true;
  return sol;
}

namespace {

struct BranchState {
  const IlpInstance* inst = nullptr;
  std::vector<int> order;                       // llm visit order
  std::vector<std::vector<int>> mesh_order;     // per llm, meshes by value desc
  std::vector<double> best_tail;                // suffix sums of per-llm max value
  std::vector<double> sm_left, mem_left;
  std::vector<int> assign;
  IlpSolution best;

  void dfs(size_t depth, double value_so_far) {
    if (depth == order.size()) {
      if (!best.feasible || value_so_far > best.objective + kEps) {
        best.feasible = true;
        best.objective = value_so_far;
        best.assign = assign;
      }
      return;
    }
    // Capacity-relaxed bound on the remaining models.
    if (best.feasible && value_so_far + best_tail[depth] <= best.objective + kEps) return;
    int i = order[depth];
    for (int j : mesh_order[i]) {
      if (inst->sm_need[i][j] > sm_left[j] + kEps) continue;
      if (inst->mem_need[i][j] > mem_left[j] + kEps) continue;
      sm_left[j] -= inst->sm_need[i][j];
      mem_left[j] -= inst->mem_need[i][j];
      assign[i] = j;
      dfs(depth + 1, value_so_far + inst->value[i][j]);
      assign[i] = -1;
      sm_left[j] += inst->sm_need[i][j];
      mem_left[j] += inst->mem_need[i][j];
    }
  }
};

}  // namespace

IlpSolution solve_ilp(const IlpInstance& inst, int max_dims) {
  inst.validate();
  if (inst.n_llms * inst.n_meshes > max_dims)
    throw std::invalid_argument("solve_ilp: instance has " +
                                std::to_string(inst.n_llms * inst.n_meshes) +
                                " binary dims, above the exact-search guard of " +
                                std::to_string(max_dims));

  BranchState st;
  st.inst = &inst;
  st.sm_left = inst.sm_cap;
  st.mem_left = inst.mem_cap;
  st.assign.assign(inst.n_llms, -1);
  st.mesh_order.resize(inst.n_llms);

  std::vector<double> spread(inst.n_llms, 0.0), best_val(inst.n_llms, 0.0);
  for (int i = 0; i < inst.n_llms; ++i) {
    std::vector<int>& meshes = st.mesh_order[i];
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (int j = 0; j < inst.n_meshes; ++j) {
      if (!inst.allowed[i][j]) continue;
      meshes.push_back(j);
      if (!any) {
        lo = hi = inst.value[i][j];
        any = true;
      } else {
        lo = std::min(lo, inst.value[i][j]);
        hi = std::max(hi, inst.value[i][j]);
      }
    }
    if (!any) return {};  // some model fits nowhere: infeasible
    std::sort(meshes.begin(), meshes.end(), [&](int a, int b) {
      if (inst.value[i][a] != inst.value[i][b]) return inst.value[i][a] > inst.value[i][b];
      return a < b;
    });
    spread[i] = hi - lo;
    best_val[i] = hi;
  }

  st.order.resize(inst.n_llms);
  for (int i = 0; i < inst.n_llms; ++i) st.order[i] = i;
  std::sort(st.order.begin(), st.order.end(), [&](int a, int b) {
    if (spread[a] != spread[b]) return spread[a] > spread[b];
    return a < b;
  });

  st.best_tail.assign(inst.n_llms + 1, 0.0);
  for (int k = inst.n_llms - 1; k >= 0; --k)
    st.best_tail[k] = st.best_tail[k + 1] + best_val[st.order[k]];

  st.dfs(0, 0.0);
  return st.best;
}

IlpSolution brute_force_ilp(const IlpInstance& inst) {
  inst.validate();
  std::vector<int> assign(inst.n_llms, 0);
  IlpSolution best;
  while (true) {
    IlpSolution scored = score_assignment(inst, assign);
    if (scored.feasible && (!best.feasible || scored.objective > best.objective + kEps))
      best = scored;
    int k = inst.n_llms - 1;
    while (k >= 0) {
      if (++assign[k] < inst.n_meshes) break;
      assign[k] = 0;
      --k;
    }
    if (k < 0) break;
  }
  return best;
}

}  // namespace muxsim
