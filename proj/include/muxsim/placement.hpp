#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "muxsim/cost_model.hpp"
#include "muxsim/ilp.hpp"

namespace muxsim {

// The request cannot be served with the given hardware; callers map this to
// a dedicated exit code.
class InfeasibleError : public std::runtime_error {
 public:
  explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

struct Cluster {
  int num_nodes = 1;
  int gpus_per_node = 1;
  std::int64_t gpu_memory_bytes = 0;
  double sms_per_gpu = 1.0;  // normalised SM capacity of one GPU

  void validate() const;
};

// A tensor-parallel group: node-local, power-of-two sized.
struct Mesh {
  int node = 0;
  std::vector<int> gpu_ids;
  int size() const { return static_cast<int>(gpu_ids.size()); }
};

// Disjoint meshes covering the whole cluster.
struct MeshGroup {
  std::vector<Mesh> meshes;
};

// One model plus the workload statistics placement runs on.
struct LlmEntry {
  LLMSpec spec;
  double rate = 0.0;
  double mean_prompt_tokens = 1.0;
  double mean_output_tokens = 1.0;
};

// Smallest SM share meeting the rate at one tp width (or the max-SM capacity
// point when nothing does).
struct ParallelCandidate {
  int tp_degree = 1;
  double num_sm = 1.0;
  int batch = 1;
  double est_tpt = 0.0;
  bool saturated = false;
};

struct PlacedLlm {
  int llm = -1;  // index into the entries vector
  ParallelCandidate candidate;
};

struct LLMUnit {
  Mesh mesh;
  std::vector<PlacedLlm> llms;
};

struct PlacementResult {
  std::string backend;
  std::vector<LLMUnit> units;  // one per mesh of the chosen group, empty ones included
  double est_total_tpt = 0.0;  // sum of unit scores
  double objective = 0.0;      // rate-weighted assignment objective, same scale for both backends
};

struct PlacementParams {
  std::vector<double> sm_list;        // empty -> {0.1, 0.2, ..., 1.0}
  std::vector<int> tp_list = {1, 2, 4, 8};
  double activation_reserve_frac = 0.1;
  int max_batch = 256;
  int max_ilp_dims = 20;

  std::vector<double> effective_sm_list() const;
};

// Per-model candidate lists, one candidate per feasible tp width. A model
// that fits no mesh at any width is a hard error naming it.
std::vector<std::vector<ParallelCandidate>> llm_parallel_candidates(
    const std::vector<LlmEntry>& llms, const Cluster& cluster, const LatencyProfile& prof,
    const PlacementParams& params);

// All partitions of the cluster into node-local power-of-two meshes,
// deduplicated up to node permutation, in canonical order.
std::vector<MeshGroup> enumerate_mesh_groups(const Cluster& cluster,
                                             const std::vector<LlmEntry>& llms);

// Greedy placement onto one group: models in decreasing computation demand,
// each onto the mesh with the best score gain. Throws InfeasibleError when
// some model fits no mesh of the group.
std::pair<std::vector<LLMUnit>, double> greedy_place(
    const MeshGroup& group, const std::vector<LlmEntry>& llms,
    const std::vector<std::vector<ParallelCandidate>>& candidates, const Cluster& cluster,
    const LatencyProfile& prof, const PlacementParams& params);

// Estimated serving throughput of one colocated unit: every member re-scored
// with its peers' prefill load and its share of the unit KV memory.
double unit_score(const Mesh& mesh, const std::vector<int>& members,
                  const std::vector<LlmEntry>& llms,
                  const std::vector<std::vector<ParallelCandidate>>& candidates,
                  const Cluster& cluster, const LatencyProfile& prof,
                  const PlacementParams& params);

// Assignment program for one group; shared by the exact backend, the greedy
// objective report, and the dominance checks.
IlpInstance build_ilp_instance(const MeshGroup& group, const std::vector<LlmEntry>& llms,
                               const std::vector<std::vector<ParallelCandidate>>& candidates,
                               const Cluster& cluster, const PlacementParams& params);

// Full planner: enumerate groups, solve each with the chosen backend
// ("greedy" or "ilp"), return the best. Throws InfeasibleError when no group
// can host the models.
PlacementResult place(const Cluster& cluster, const std::vector<LlmEntry>& llms,
                      const LatencyProfile& prof, const PlacementParams& params,
                      const std::string& backend);

// Independent capacity re-check of a finished placement.
void verify_placement(const Cluster& cluster, const std::vector<LlmEntry>& llms,
                      const PlacementResult& result, const PlacementParams& params);

}  // namespace muxsim
