#include "muxsim/placement.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "muxsim/log.hpp"

namespace muxsim {

namespace {
constexpr double kEps = 1e-9;
}

void Cluster::validate() const {
  if (num_nodes < 1 || gpus_per_node < 1)
    throw std::invalid_argument("cluster: need at least one node and one gpu per node");
  if (gpu_memory_bytes <= 0) throw std::invalid_argument("cluster: gpu_memory_bytes must be positive");
  if (!(sms_per_gpu > 0.0)) throw std::invalid_argument("cluster: sms_per_gpu must be positive");
}

std::vector<double> PlacementParams::effective_sm_list() const {
  if (!sm_list.empty()) return sm_list;
  std::vector<double> out;
  for (int i = 1; i <= 10; ++i) out.push_back(i / 10.0);
  return out;
}

namespace {

double usable_frac(const PlacementParams& params) { return 1.0 - params.activation_reserve_frac; }

double mesh_usable_bytes(const Mesh& mesh, const Cluster& cluster, const PlacementParams& params) {
  return usable_frac(params) * static_cast<double>(mesh.size()) *
         static_cast<double>(cluster.gpu_memory_bytes);
}

double request_kv_bytes(const LlmEntry& e) {
  return e.spec.kv_bytes_per_token() * (e.mean_prompt_tokens + e.mean_output_tokens);
}

const ParallelCandidate* find_candidate(const std::vector<ParallelCandidate>& cands, int tp) {
  for (const ParallelCandidate& c : cands)
    if (c.tp_degree == tp) return &c;
  return nullptr;
}

// Planning memory demand of one placed model: weights plus the KV bytes of
// its stable batch. Shared by greedy feasibility and the assignment program.
double member_mem_bytes(const LlmEntry& e, const ParallelCandidate& cand) {
  return static_cast<double>(e.spec.weight_bytes) + cand.batch * request_kv_bytes(e);
}

}  // namespace

std::vector<std::vector<ParallelCandidate>> llm_parallel_candidates(
    const std::vector<LlmEntry>& llms, const Cluster& cluster, const LatencyProfile& prof,
    const PlacementParams& params) {
  cluster.validate();
  prof.validate();
  std::vector<double> sm_list = params.effective_sm_list();
  std::vector<std::vector<ParallelCandidate>> out(llms.size());

  for (size_t i = 0; i < llms.size(); ++i) {
    const LlmEntry& e = llms[i];
    e.spec.validate();
    for (int tp : params.tp_list) {
      if (tp > cluster.gpus_per_node) continue;  // meshes are node-local
      double mesh_bytes = usable_frac(params) * static_cast<double>(tp) *
                          static_cast<double>(cluster.gpu_memory_bytes);
      double kv_bytes = mesh_bytes - static_cast<double>(e.spec.weight_bytes);
      if (kv_bytes <= 0.0) continue;  // weights alone do not fit this width
      int max_batch = static_cast<int>(
          std::clamp<double>(std::floor(kv_bytes / request_kv_bytes(e)), 1.0, params.max_batch));

      if (e.rate <= 0.0) {
        // No traffic: the smallest share trivially keeps up.
        out[i].push_back({tp, sm_list.front(), 1, 0.0, false});
        continue;
      }

      ParallelCandidate chosen;
      bool found = false;
      ThroughputEstimate est{};
      for (double sm : sm_list) {
        est = estimate_throughput(e.spec, prof, sm, tp, e.rate, {}, e.mean_prompt_tokens,
                                  e.mean_output_tokens, max_batch);
        if (!est.saturated) {
          chosen = {tp, sm, est.batch, est.throughput, false};
          found = true;
          break;
        }
      }
      if (!found) chosen = {tp, sm_list.back(), est.batch, est.throughput, true};
      out[i].push_back(chosen);
    }
    if (out[i].empty())
      throw InfeasibleError("llm '" + e.spec.name +
                            "' does not fit any mesh at any tensor-parallel width");
  }
  return out;
}

namespace {

// Partitions of n gpus into power-of-two parts, each part <= 8, descending.
void node_partitions(int n, int max_part, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (n == 0) {
    out.push_back(cur);
    return;
  }
  for (int part = std::min(n, max_part); part >= 1; --part) {
    if ((part & (part - 1)) != 0 || part > 8) continue;
    cur.push_back(part);
    node_partitions(n - part, part, cur, out);
    cur.pop_back();
  }
}

// Combinations with repetition of partition indices across identical nodes
// (non-decreasing index sequences), which removes node-permutation
// duplicates.
void node_combos(int node, int num_nodes, int min_idx, int num_partitions, std::vector<int>& cur,
                 std::vector<std::vector<int>>& out) {
  if (node == num_nodes) {
    out.push_back(cur);
    return;
  }
  for (int idx = min_idx; idx < num_partitions; ++idx) {
    cur.push_back(idx);
    node_combos(node + 1, num_nodes, idx, num_partitions, cur, out);
    cur.pop_back();
  }
}

}  // namespace

std::vector<MeshGroup> enumerate_mesh_groups(const Cluster& cluster,
                                             const std::vector<LlmEntry>& llms) {
  cluster.validate();
  std::vector<std::vector<int>> partitions;
  std::vector<int> cur;
  node_partitions(cluster.gpus_per_node, cluster.gpus_per_node, cur, partitions);

  std::vector<std::vector<int>> combos;
  std::vector<int> combo;
  node_combos(0, cluster.num_nodes, 0, static_cast<int>(partitions.size()), combo, combos);

  double total_weights = 0.0;
  for (const LlmEntry& e : llms) total_weights += static_cast<double>(e.spec.weight_bytes);
  double cluster_bytes = static_cast<double>(cluster.num_nodes) * cluster.gpus_per_node *
                         static_cast<double>(cluster.gpu_memory_bytes);

  std::vector<MeshGroup> groups;
  for (const std::vector<int>& c : combos) {
    if (cluster_bytes < total_weights) continue;  // cannot even hold the weights
    MeshGroup group;
    for (int node = 0; node < cluster.num_nodes; ++node) {
      int next_gpu = node * cluster.gpus_per_node;
      for (int part : partitions[c[node]]) {
        Mesh mesh;
        mesh.node = node;
        for (int k = 0; k < part; ++k) mesh.gpu_ids.push_back(next_gpu++);
        group.meshes.push_back(std::move(mesh));
      }
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

double unit_score(const Mesh& mesh, const std::vector<int>& members,
                  const std::vector<LlmEntry>& llms,
                  const std::vector<std::vector<ParallelCandidate>>& candidates,
                  const Cluster& cluster, const LatencyProfile& prof,
                  const PlacementParams& params) {
  if (members.empty()) return 0.0;
  int tp = mesh.size();
  double usable = mesh_usable_bytes(mesh, cluster, params);
  double weights = 0.0;
  double denom_total = 0.0;
  for (int m : members) {
    weights += static_cast<double>(llms[m].spec.weight_bytes);
    denom_total += llms[m].rate * request_kv_bytes(llms[m]);
  }
  double unit_kv = usable - weights;
  if (unit_kv <= 0.0) return -std::numeric_limits<double>::infinity();

  double total = 0.0;
  for (int m : members) {
    const LlmEntry& e = llms[m];
    if (e.rate <= 0.0) continue;
    const ParallelCandidate* cand = find_candidate(candidates[m], tp);
    if (cand == nullptr) return -std::numeric_limits<double>::infinity();
    std::vector<PeerLoad> peers;
    for (int p : members) {
      if (p == m) continue;
      const ParallelCandidate* pc = find_candidate(candidates[p], tp);
      if (pc == nullptr) return -std::numeric_limits<double>::infinity();
      if (llms[p].rate <= 0.0) continue;  // no recurring prefill load
      peers.push_back({&llms[p].spec,
                       ExecConfig{tp, pc->num_sm},
                       pc->batch,
                       llms[p].mean_prompt_tokens});
    }
    double share = denom_total > 0.0 ? e.rate * request_kv_bytes(e) / denom_total : 0.0;
    int max_batch = static_cast<int>(std::clamp<double>(
        std::floor(unit_kv * share / request_kv_bytes(e)), 1.0, params.max_batch));
    ThroughputEstimate est = estimate_throughput(e.spec, prof, cand->num_sm, tp, e.rate, peers,
                                                 e.mean_prompt_tokens, e.mean_output_tokens,
                                                 max_batch);
    total += est.throughput;
  }
  return total;
}

namespace {

// Shared feasibility of adding `llm` to a mesh already holding `members`.
bool fits_unit(const Mesh& mesh, const std::vector<int>& members, int llm,
               const std::vector<LlmEntry>& llms,
               const std::vector<std::vector<ParallelCandidate>>& candidates,
               const Cluster& cluster, const PlacementParams& params) {
  int tp = mesh.size();
  const ParallelCandidate* cand = find_candidate(candidates[llm], tp);
  if (cand == nullptr) return false;
  double sm = cand->num_sm;
  double mem = member_mem_bytes(llms[llm], *cand);
  for (int m : members) {
    const ParallelCandidate* mc = find_candidate(candidates[m], tp);
    if (mc == nullptr) return false;
    sm += mc->num_sm;
    mem += member_mem_bytes(llms[m], *mc);
  }
  return sm <= 1.0 + kEps && mem <= mesh_usable_bytes(mesh, cluster, params) + kEps;
}

}  // namespace

std::pair<std::vector<LLMUnit>, double> greedy_place(
    const MeshGroup& group, const std::vector<LlmEntry>& llms,
    const std::vector<std::vector<ParallelCandidate>>& candidates, const Cluster& cluster,
    const LatencyProfile& prof, const PlacementParams& params) {
  size_t n_mesh = group.meshes.size();
  std::vector<std::vector<int>> members(n_mesh);
  std::vector<double> score(n_mesh, 0.0);

  // Computation demand: heavier, longer, busier models place first.
  std::vector<int> order(llms.size());
  for (size_t i = 0; i < llms.size(); ++i) order[i] = static_cast<int>(i);
  auto demand = [&](int i) {
    const LlmEntry& e = llms[i];
    return e.rate * (e.mean_prompt_tokens + e.mean_output_tokens) *
           static_cast<double>(e.spec.num_layers) * e.spec.hidden_size;
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double da = demand(a), db = demand(b);
    if (da != db) return da > db;
    return llms[a].spec.name < llms[b].spec.name;
  });

  for (int i : order) {
    int best_mesh = -1;
    double best_delta = -std::numeric_limits<double>::infinity();
    double best_new_score = 0.0;
    for (size_t mi = 0; mi < n_mesh; ++mi) {
      if (!fits_unit(group.meshes[mi], members[mi], i, llms, candidates, cluster, params)) continue;
      std::vector<int> with = members[mi];
      with.push_back(i);
      double new_score =
          unit_score(group.meshes[mi], with, llms, candidates, cluster, prof, params);
      double delta = new_score - score[mi];
      if (delta > best_delta + kEps) {  // strict improvement keeps the lowest mesh index
        best_delta = delta;
        best_mesh = static_cast<int>(mi);
        best_new_score = new_score;
      }
    }
    if (best_mesh < 0)
      throw InfeasibleError("llm '" + llms[i].spec.name + "' fits no mesh of this group");
    members[best_mesh].push_back(i);
    score[best_mesh] = best_new_score;
  }

  std::vector<LLMUnit> units(n_mesh);
  double total = 0.0;
  for (size_t mi = 0; mi < n_mesh; ++mi) {
    units[mi].mesh = group.meshes[mi];
    for (int m : members[mi]) {
      const ParallelCandidate* cand = find_candidate(candidates[m], group.meshes[mi].size());
      units[mi].llms.push_back({m, *cand});
    }
    total += score[mi];
  }
  return {std::move(units), total};
}

IlpInstance build_ilp_instance(const MeshGroup& group, const std::vector<LlmEntry>& llms,
                               const std::vector<std::vector<ParallelCandidate>>& candidates,
                               const Cluster& cluster, const PlacementParams& params) {
  IlpInstance inst;
  inst.n_llms = static_cast<int>(llms.size());
  inst.n_meshes = static_cast<int>(group.meshes.size());
  inst.value.assign(inst.n_llms, std::vector<double>(inst.n_meshes, 0.0));
  inst.allowed.assign(inst.n_llms, std::vector<char>(inst.n_meshes, 0));
  inst.sm_need.assign(inst.n_llms, std::vector<double>(inst.n_meshes, 0.0));
  inst.mem_need.assign(inst.n_llms, std::vector<double>(inst.n_meshes, 0.0));
  inst.sm_cap.assign(inst.n_meshes, 1.0);
  inst.mem_cap.resize(inst.n_meshes);
  for (int j = 0; j < inst.n_meshes; ++j)
    inst.mem_cap[j] = mesh_usable_bytes(group.meshes[j], cluster, params);

  for (int i = 0; i < inst.n_llms; ++i) {
    for (int j = 0; j < inst.n_meshes; ++j) {
      const ParallelCandidate* cand = find_candidate(candidates[i], group.meshes[j].size());
      if (cand == nullptr) continue;
      double mem = member_mem_bytes(llms[i], *cand);
      if (mem > inst.mem_cap[j] + kEps || cand->num_sm > 1.0 + kEps) continue;
      inst.allowed[i][j] = 1;
      inst.value[i][j] = llms[i].rate * cand->est_tpt;
      inst.sm_need[i][j] = cand->num_sm;
      inst.mem_need[i][j] = mem;
    }
  }
  return inst;
}

namespace {

std::vector<LLMUnit> units_from_assignment(const MeshGroup& group,
                                           const std::vector<std::vector<ParallelCandidate>>& candidates,
                                           const std::vector<int>& assign) {
  std::vector<LLMUnit> units(group.meshes.size());
  for (size_t mi = 0; mi < group.meshes.size(); ++mi) units[mi].mesh = group.meshes[mi];
  for (size_t i = 0; i < assign.size(); ++i) {
    int j = assign[i];
    const ParallelCandidate* cand = find_candidate(candidates[i], group.meshes[j].size());
    units[j].llms.push_back({static_cast<int>(i), *cand});
  }
  return units;
}

double units_total_score(const std::vector<LLMUnit>& units, const std::vector<LlmEntry>& llms,
                         const std::vector<std::vector<ParallelCandidate>>& candidates,
                         const Cluster& cluster, const LatencyProfile& prof,
                         const PlacementParams& params) {
  double total = 0.0;
  for (const LLMUnit& u : units) {
    if (u.llms.empty()) continue;
    std::vector<int> members;
    for (const PlacedLlm& p : u.llms) members.push_back(p.llm);
    total += unit_score(u.mesh, members, llms, candidates, cluster, prof, params);
  }
  return total;
}

}  // namespace

PlacementResult place(const Cluster& cluster, const std::vector<LlmEntry>& llms,
                      const LatencyProfile& prof, const PlacementParams& params,
                      const std::string& backend) {
  if (backend != "greedy" && backend != "ilp")
    throw std::invalid_argument("place: backend must be 'greedy' or 'ilp'");
  if (llms.empty()) throw std::invalid_argument("place: need at least one llm");
  std::vector<std::vector<ParallelCandidate>> candidates =
      llm_parallel_candidates(llms, cluster, prof, params);
  std::vector<MeshGroup> groups = enumerate_mesh_groups(cluster, llms);
  if (groups.empty()) throw InfeasibleError("cluster memory cannot hold the model weights");

  PlacementResult best;
  bool found = false;
  double best_key = -std::numeric_limits<double>::infinity();

  for (const MeshGroup& group : groups) {
    if (backend == "greedy") {
      std::pair<std::vector<LLMUnit>, double> solved;
      try {
        solved = greedy_place(group, llms, candidates, cluster, prof, params);
      } catch (const InfeasibleError&) {
        continue;
      }
      if (solved.second > best_key + kEps) {
        best_key = solved.second;
        // Score the greedy assignment with the shared objective for reporting.
        std::vector<int> assign(llms.size(), -1);
        for (size_t mi = 0; mi < solved.first.size(); ++mi)
          for (const PlacedLlm& p : solved.first[mi].llms) assign[p.llm] = static_cast<int>(mi);
        IlpInstance inst = build_ilp_instance(group, llms, candidates, cluster, params);
        IlpSolution scored = score_assignment(inst, assign);
        best.backend = backend;
        best.units = std::move(solved.first);
        best.est_total_tpt = solved.second;
        best.objective = scored.feasible ? scored.objective : 0.0;
        found = true;
      }
    } else {
      IlpInstance inst = build_ilp_instance(group, llms, candidates, cluster, params);
      IlpSolution sol = solve_ilp(inst, params.max_ilp_dims);
      if (!sol.feasible) continue;
      if (sol.objective > best_key + kEps) {
        best_key = sol.objective;
        best.backend = backend;
        best.units = units_from_assignment(group, candidates, sol.assign);
        best.objective = sol.objective;
        best.est_total_tpt =
            units_total_score(best.units, llms, candidates, cluster, prof, params);
        found = true;
      }
    }
  }
  if (!found) throw InfeasibleError("no mesh group can host all models within capacity");
  verify_placement(cluster, llms, best, params);
  log_info("placement backend=" + best.backend + " objective=" + std::to_string(best.objective) +
           " est_tpt=" + std::to_string(best.est_total_tpt));
  return best;
}

void verify_placement(const Cluster& cluster, const std::vector<LlmEntry>& llms,
                      const PlacementResult& result, const PlacementParams& params) {
  std::set<int> gpus_seen;
  std::vector<int> llm_seen(llms.size(), 0);
  int total_gpus = cluster.num_nodes * cluster.gpus_per_node;

  for (const LLMUnit& u : result.units) {
    int tp = u.mesh.size();
    if (tp != 1 && tp != 2 && tp != 4 && tp != 8)
      throw std::logic_error("placement verify: mesh size must be 1, 2, 4, or 8");
    for (int g : u.mesh.gpu_ids) {
      if (g < 0 || g >= total_gpus) throw std::logic_error("placement verify: gpu id out of range");
      if (!gpus_seen.insert(g).second)
        throw std::logic_error("placement verify: gpu assigned to two meshes");
    }
    double sm = 0.0;
    double mem = 0.0;
    for (const PlacedLlm& p : u.llms) {
      if (p.llm < 0 || p.llm >= static_cast<int>(llms.size()))
        throw std::logic_error("placement verify: llm index out of range");
      llm_seen[p.llm] += 1;
      if (p.candidate.tp_degree != tp)
        throw std::logic_error("placement verify: tensor-parallel width != mesh size");
      sm += p.candidate.num_sm;
      mem += member_mem_bytes(llms[p.llm], p.candidate);
    }
    if (sm > 1.0 + kEps) throw std::logic_error("placement verify: sm shares exceed 1.0 on a mesh");
    if (mem > mesh_usable_bytes(u.mesh, cluster, params) + kEps)
      throw std::logic_error("placement verify: memory demand exceeds mesh capacity");
  }
  if (static_cast<int>(gpus_seen.size()) != total_gpus)
    throw std::logic_error("placement verify: meshes do not cover every gpu exactly once");
  for (size_t i = 0; i < llms.size(); ++i)
    if (llm_seen[i] != 1) throw std::logic_error("placement verify: llm not placed exactly once");
}

}  // namespace muxsim
