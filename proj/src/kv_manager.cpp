#include "muxsim/kv_manager.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace muxsim {

MemoryLayout MemoryLayout::for_mesh(std::int64_t mesh_bytes, std::int64_t weights_bytes,
                                    double activation_reserve_frac) {
  if (mesh_bytes <= 0) throw std::invalid_argument("memory layout: mesh_bytes must be positive");
  if (weights_bytes < 0) throw std::invalid_argument("memory layout: weights_bytes must be >= 0");
  if (!(activation_reserve_frac >= 0.0) || activation_reserve_frac >= 1.0)
    throw std::invalid_argument("memory layout: activation_reserve_frac must be in [0,1)");
  MemoryLayout layout;
  layout.weights_bytes = weights_bytes;
  layout.activation_reserve_bytes = llround(activation_reserve_frac * mesh_bytes);
  layout.kv_bytes = mesh_bytes - weights_bytes - layout.activation_reserve_bytes;
  if (layout.kv_bytes <= 0)
    throw std::invalid_argument("memory layout: weights and reserve exceed mesh memory");
  return layout;
}

double blocks_per_token(const LLMSpec& spec, int block_tokens) {
  if (block_tokens < 1) throw std::invalid_argument("blocks_per_token: block_tokens must be >= 1");
  return 2.0 * spec.num_layers * spec.num_heads / block_tokens;
}

std::int64_t blocks_for_tokens(const LLMSpec& spec, int block_tokens, std::int64_t tokens) {
  if (block_tokens < 1) throw std::invalid_argument("blocks_for_tokens: block_tokens must be >= 1");
  if (tokens < 0) throw std::invalid_argument("blocks_for_tokens: tokens must be >= 0");
  std::int64_t rows = (tokens + block_tokens - 1) / block_tokens;
  return rows * 2 * spec.num_layers * spec.num_heads;
}

std::int64_t block_bytes(const LLMSpec& spec, int block_tokens) {
  if (block_tokens < 1) throw std::invalid_argument("block_bytes: block_tokens must be >= 1");
  return static_cast<std::int64_t>(spec.head_dim) * block_tokens * spec.bytes_per_element;
}

BlockPool::BlockPool(std::int64_t total_blocks) {
  if (total_blocks <= 0) throw std::invalid_argument("block pool: total_blocks must be positive");
  total_blocks_ = total_blocks;
  free_blocks_ = total_blocks;
}

void BlockPool::register_llm(int llm, const LLMSpec* spec, int block_tokens) {
  if (llm < 0) throw std::logic_error("block pool: llm index must be >= 0");
  if (spec == nullptr) throw std::logic_error("block pool: null spec");
  if (block_tokens < 1) throw std::logic_error("block pool: block_tokens must be >= 1");
  if (llm >= static_cast<int>(llms_.size())) llms_.resize(llm + 1);
  llms_[llm].spec = spec;
  llms_[llm].block_tokens = block_tokens;
}

const BlockPool::LlmSlot& BlockPool::slot(int llm) const {
  if (llm < 0 || llm >= static_cast<int>(llms_.size()) || llms_[llm].spec == nullptr)
    throw std::logic_error("block pool: unregistered llm " + std::to_string(llm));
  return llms_[llm];
}

BlockPool::LlmSlot& BlockPool::slot(int llm) {
  return const_cast<LlmSlot&>(static_cast<const BlockPool*>(this)->slot(llm));
}

/*
 * Admission charges the request's final footprint before any block moves.
 * Because every gate compares commitments (reserved worst cases, or plain
 * usage for reservation-less requests), the sum of admitted worst cases never
 * outgrows the pool: decode-time growth always finds its reserved rows free,
 * so admitted requests cannot strand each other mid-generation.
 */
AllocResult BlockPool::admit(int llm, std::int64_t request_id, std::int64_t prompt_tokens,
                             std::int64_t total_tokens) {
  if (prompt_tokens < 1 || total_tokens < prompt_tokens)
    throw std::logic_error("block pool: admit needs 1 <= prompt_tokens <= total_tokens");
  LlmSlot& s = slot(llm);
  if (s.request_tokens.count(request_id) != 0)
    throw std::logic_error("block pool: request admitted twice: " + std::to_string(request_id));
  std::int64_t wc = blocks_for_tokens(*s.spec, s.block_tokens, total_tokens);
  if (s.committed + wc > s.quota) return {false, AllocError::Quota};
  if (committed_total_ + wc > total_blocks_) return {false, AllocError::Pool};
  s.reserve_blocks[request_id] = wc;
  s.committed += wc;
  committed_total_ += wc;
  AllocResult got = alloc(llm, request_id, prompt_tokens, false);
  if (!got.ok) {  // reachable only when reservation-less allocations crowd the pool
    s.reserve_blocks.erase(request_id);
    s.committed -= wc;
    committed_total_ -= wc;
  }
  return got;
}

AllocResult BlockPool::alloc(int llm, std::int64_t request_id, std::int64_t add_tokens,
                             bool enforce_quota) {
  if (add_tokens < 0) throw std::logic_error("block pool: add_tokens must be >= 0");
  LlmSlot& s = slot(llm);
  std::int64_t before = 0;
  auto it = s.request_tokens.find(request_id);
  if (it != s.request_tokens.end()) before = it->second;
  std::int64_t before_blocks = blocks_for_tokens(*s.spec, s.block_tokens, before);
  std::int64_t after_blocks = blocks_for_tokens(*s.spec, s.block_tokens, before + add_tokens);
  std::int64_t delta = after_blocks - before_blocks;
  if (enforce_quota && s.used + delta > s.quota) return {false, AllocError::Quota};
  if (delta > free_blocks_) return {false, AllocError::Pool};
  // Growth inside a reservation is already committed; only the part running
  // past it (or any growth of a reservation-less request) adds commitment.
  std::int64_t res = 0;
  auto rit = s.reserve_blocks.find(request_id);
  if (rit != s.reserve_blocks.end()) res = rit->second;
  std::int64_t commit_delta = std::max(after_blocks, res) - std::max(before_blocks, res);
  s.used += delta;
  s.committed += commit_delta;
  free_blocks_ -= delta;
  committed_total_ += commit_delta;
  s.request_tokens[request_id] = before + add_tokens;
  return {true, AllocError::None};
}

void BlockPool::free_request(int llm, std::int64_t request_id) {
  LlmSlot& s = slot(llm);
  auto it = s.request_tokens.find(request_id);
  if (it == s.request_tokens.end())
    throw std::logic_error("block pool: free of unknown request " + std::to_string(request_id));
  std::int64_t blocks = blocks_for_tokens(*s.spec, s.block_tokens, it->second);
  std::int64_t res = 0;
  auto rit = s.reserve_blocks.find(request_id);
  if (rit != s.reserve_blocks.end()) {
    res = rit->second;
    s.reserve_blocks.erase(rit);
  }
  std::int64_t commit = std::max(blocks, res);
  s.used -= blocks;
  s.committed -= commit;
  free_blocks_ += blocks;
  committed_total_ -= commit;
  s.request_tokens.erase(it);
}

void BlockPool::set_quota(int llm, std::int64_t blocks) {
  if (blocks < 0) throw std::logic_error("block pool: quota must be >= 0");
  slot(llm).quota = blocks;
}

std::int64_t BlockPool::quota(int llm) const { return slot(llm).quota; }

std::int64_t BlockPool::used(int llm) const { return slot(llm).used; }

std::int64_t BlockPool::committed(int llm) const { return slot(llm).committed; }

std::int64_t BlockPool::request_tokens(int llm, std::int64_t request_id) const {
  const LlmSlot& s = slot(llm);
  auto it = s.request_tokens.find(request_id);
  return it == s.request_tokens.end() ? 0 : it->second;
}

std::int64_t BlockPool::total_used() const {
  std::int64_t sum = 0;
  for (const LlmSlot& s : llms_) sum += s.used;
  return sum;
}

void BlockPool::check_conservation() const {
  if (total_used() + free_blocks_ != total_blocks_)
    throw std::logic_error("block pool: conservation violated");
  std::int64_t commit_sum = 0;
  for (const LlmSlot& s : llms_) {
    std::int64_t acc = 0;
    std::int64_t commit = 0;
    for (const auto& [id, tokens] : s.request_tokens) {
      std::int64_t blocks = blocks_for_tokens(*s.spec, s.block_tokens, tokens);
      auto rit = s.reserve_blocks.find(id);
      acc += blocks;
      commit += std::max(blocks, rit == s.reserve_blocks.end() ? 0 : rit->second);
    }
    if (acc != s.used) throw std::logic_error("block pool: per-llm usage out of sync");
    if (commit != s.committed || s.reserve_blocks.size() > s.request_tokens.size())
      throw std::logic_error("block pool: per-llm commitment out of sync");
    commit_sum += commit;
  }
  if (commit_sum != committed_total_)
    throw std::logic_error("block pool: total commitment out of sync");
}

namespace {

// Largest-remainder rounding of non-negative real targets to integers
// summing exactly to total.
std::vector<std::int64_t> round_to_sum(const std::vector<double>& targets, std::int64_t total) {
  size_t n = targets.size();
  std::vector<std::int64_t> out(n);
  std::vector<std::pair<double, size_t>> rema(n);
  std::int64_t assigned = 0;
  for (size_t i = 0; i < n; ++i) {
    double t = std::max(0.0, targets[i]);
    out[i] = static_cast<std::int64_t>(std::floor(t));
    rema[i] = {t - std::floor(t), i};
    assigned += out[i];
  }
  std::int64_t leftover = total - assigned;
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (size_t k = 0; leftover > 0 && k < n; ++k, --leftover) out[rema[k].second] += 1;
  // A negative leftover (all-floor over total) cannot happen for floor sums,
  // but guard against argument degeneracies anyway.
  for (size_t k = 0; leftover < 0 && k < n; ++k) {
    size_t i = rema[n - 1 - k].second;
    if (out[i] > 0) {
      out[i] -= 1;
      ++leftover;
    }
  }
  return out;
}

}  // namespace

std::vector<std::int64_t> init_token_block_quota(const std::vector<QuotaInput>& llms,
                                                 std::int64_t kv_blocks, double floor_frac) {
  if (llms.empty()) throw std::invalid_argument("init quota: need at least one llm");
  if (kv_blocks <= 0) throw std::invalid_argument("init quota: kv_blocks must be positive");
  if (!(floor_frac >= 0.0) || floor_frac >= 1.0)
    throw std::invalid_argument("init quota: floor_frac must be in [0,1)");
  size_t n = llms.size();
  // Keep the floors feasible even for many models.
  double floor_eff = std::min(floor_frac, 1.0 / static_cast<double>(n));
  double floor_blocks = floor_eff * static_cast<double>(kv_blocks);

  std::vector<double> weight(n);
  double total_weight = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const QuotaInput& q = llms[i];
    if (!(q.rate >= 0.0) || !(q.blocks_per_token >= 0.0) || !(q.mean_request_tokens >= 0.0))
      throw std::invalid_argument("init quota: inputs must be >= 0");
    weight[i] = q.rate * q.blocks_per_token * q.mean_request_tokens;
    total_weight += weight[i];
  }

  std::vector<double> target(n, 0.0);
  if (total_weight <= 0.0) {
    for (size_t i = 0; i < n; ++i) target[i] = static_cast<double>(kv_blocks) / n;
    return round_to_sum(target, kv_blocks);
  }

  // Water filling: pin models whose proportional share falls below the
  // floor, re-share the rest.
  std::vector<bool> pinned(n, false);
  while (true) {
    double pinned_total = 0.0;
    double active_weight = 0.0;
    for (size_t i = 0; i < n; ++i) {
      if (pinned[i])
        pinned_total += floor_blocks;
      else
        active_weight += weight[i];
    }
    double remaining = static_cast<double>(kv_blocks) - pinned_total;
    bool changed = false;
    for (size_t i = 0; i < n; ++i) {
      if (pinned[i]) {
        target[i] = floor_blocks;
        continue;
      }
      double share = active_weight > 0.0 ? remaining * weight[i] / active_weight
                                         : remaining / std::max<size_t>(1, n);
      if (share < floor_blocks) {
        pinned[i] = true;
        changed = true;
      } else {
        target[i] = share;
      }
    }
    if (!changed) break;
  }
  return round_to_sum(target, kv_blocks);
}

std::vector<std::int64_t> adapt_quota(const std::vector<double>& utilizations,
                                      const std::vector<std::int64_t>& quotas,
                                      std::int64_t floor_blocks, const QuotaAdaptParams& params) {
  if (utilizations.size() != quotas.size())
    throw std::invalid_argument("adapt quota: utilizations and quotas must align");
  if (floor_blocks < 0) throw std::invalid_argument("adapt quota: floor must be >= 0");
  size_t n = quotas.size();

  std::vector<double> util(n);
  for (size_t i = 0; i < n; ++i) util[i] = std::clamp(utilizations[i], 0.0, 1.0);

  std::vector<double> deficit(n, 0.0);
  bool any_receiver = false;
  for (size_t i = 0; i < n; ++i) {
    if (util[i] > params.high_mark) {
      deficit[i] = (util[i] - params.high_mark) * static_cast<double>(quotas[i]);
      if (deficit[i] > 0.0) any_receiver = true;
    }
  }
  if (!any_receiver) return quotas;

  std::vector<std::int64_t> give(n, 0);
  std::int64_t pot = 0;
  for (size_t i = 0; i < n; ++i) {
    if (util[i] < params.low_mark && deficit[i] == 0.0) {
      std::int64_t step = llround(params.step_frac * static_cast<double>(quotas[i]));
      give[i] = std::clamp<std::int64_t>(std::min(step, quotas[i] - floor_blocks), 0, quotas[i]);
      pot += give[i];
    }
  }
  if (pot == 0) return quotas;

  double deficit_total = std::accumulate(deficit.begin(), deficit.end(), 0.0);
  std::vector<double> recv_target(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    recv_target[i] = static_cast<double>(pot) * deficit[i] / deficit_total;
  std::vector<std::int64_t> recv = round_to_sum(recv_target, pot);

  std::vector<std::int64_t> out(n);
  for (size_t i = 0; i < n; ++i) out[i] = quotas[i] - give[i] + recv[i];
  return out;
}

}  // namespace muxsim
