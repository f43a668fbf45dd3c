#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "muxsim/cost_model.hpp"

namespace muxsim {

// Carve a mesh's memory into weights, an activation reserve, and the KV
// region that backs the block pool.
struct MemoryLayout {
  std::int64_t weights_bytes = 0;
  std::int64_t activation_reserve_bytes = 0;
  std::int64_t kv_bytes = 0;

  static MemoryLayout for_mesh(std::int64_t mesh_bytes, std::int64_t weights_bytes,
                               double activation_reserve_frac);
};

// Cache blocks are head-granular: one block holds K or V for one (layer,
// head) slot over block_tokens consecutive tokens, so a token costs
// 2 * num_layers * num_heads / block_tokens blocks amortised.
double blocks_per_token(const LLMSpec& spec, int block_tokens);

// Whole blocks needed to cache `tokens` tokens: ceil(tokens / block_tokens)
// block rows of 2 * num_layers * num_heads head-blocks each.
std::int64_t blocks_for_tokens(const LLMSpec& spec, int block_tokens, std::int64_t tokens);

// Bytes of one head-block: head_dim * block_tokens * bytes_per_element.
std::int64_t block_bytes(const LLMSpec& spec, int block_tokens);

enum class AllocError { None, Pool, Quota };

struct AllocResult {
  bool ok = false;
  AllocError error = AllocError::None;
};

// Unified block pool shared by all models of one unit. Blocks are tracked
// per request and freed all at once when the request completes. Admission
// reserves a request's worst-case footprint against its model's quota and
// against the pool, so later per-token growth is pre-paid and cannot dead-end
// with blocks stranded behind unfinished requests. Quotas cap admissions
// only: allocations with enforce_quota=false (decode growth) may run past a
// shrunken quota so in-flight requests can finish.
class BlockPool {
 public:
  explicit BlockPool(std::int64_t total_blocks);

  // Models must be registered before use; ids are dense indices.
  void register_llm(int llm, const LLMSpec* spec, int block_tokens);
  int num_llms() const { return static_cast<int>(llms_.size()); }

  // Admit a fresh request: charge the blocks it will hold once fully
  // generated (total_tokens) against the model's quota and the pool, then
  // allocate its prompt blocks. Quota failures win over pool failures.
  AllocResult admit(int llm, std::int64_t request_id, std::int64_t prompt_tokens,
                    std::int64_t total_tokens);

  // Grow a request by add_tokens; allocates only the block delta and is
  // atomic (either the whole delta or nothing). Quota failures win over pool
  // failures.
  AllocResult alloc(int llm, std::int64_t request_id, std::int64_t add_tokens, bool enforce_quota);

  // Release every block of a request, and its reservation if admitted.
  // Unknown request -> logic_error.
  void free_request(int llm, std::int64_t request_id);

  void set_quota(int llm, std::int64_t blocks);
  std::int64_t quota(int llm) const;
  std::int64_t used(int llm) const;
  // Blocks the model is answerable for: each request counts at its reserved
  // worst case (or plain usage when it was never admitted with one).
  std::int64_t committed(int llm) const;
  std::int64_t request_tokens(int llm, std::int64_t request_id) const;
  std::int64_t total_used() const;
  std::int64_t committed_total() const { return committed_total_; }
  std::int64_t free_blocks() const { return free_blocks_; }
  std::int64_t total_blocks() const { return total_blocks_; }

  // Invariants: sum of per-model usage plus free equals the pool size, and
  // commitment counters match the per-request reservations.
  void check_conservation() const;

 private:
  struct LlmSlot {
    const LLMSpec* spec = nullptr;
    int block_tokens = 16;
    std::int64_t quota = 0;
    std::int64_t used = 0;
    std::int64_t committed = 0;
    std::map<std::int64_t, std::int64_t> request_tokens;   // request id -> cached tokens
    std::map<std::int64_t, std::int64_t> reserve_blocks;   // request id -> worst-case blocks
  };

  const LlmSlot& slot(int llm) const;
  LlmSlot& slot(int llm);

  std::int64_t total_blocks_ = 0;
  std::int64_t free_blocks_ = 0;
  std::int64_t committed_total_ = 0;
  std::vector<LlmSlot> llms_;
};

// Quota seeding: shares proportional to rate * blocks_per_token *
// mean_request_tokens, subject to a floor, summing exactly to kv_blocks.
struct QuotaInput {
  double rate = 0.0;
  double blocks_per_token = 0.0;
  double mean_request_tokens = 0.0;
};

std::vector<std::int64_t> init_token_block_quota(const std::vector<QuotaInput>& llms,
                                                 std::int64_t kv_blocks,
                                                 double floor_frac = 0.02);

struct QuotaAdaptParams {
  double low_mark = 0.5;
  double high_mark = 0.9;
  double step_frac = 0.1;
};

/*
 * Periodic quota shift: models below low_mark donate step_frac of their
 * quota (never below floor_blocks); the pot is split among models above
 * high_mark proportionally to their deficit (util - high_mark) * quota.
 * With no receivers the quotas are returned unchanged. The sum is preserved
 * exactly.
 */
std::vector<std::int64_t> adapt_quota(const std::vector<double>& utilizations,
                                      const std::vector<std::int64_t>& quotas,
                                      std::int64_t floor_blocks,
                                      const QuotaAdaptParams& params = {});

}  // namespace muxsim
