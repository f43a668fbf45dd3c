#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdint>
#include <map>
#include <numeric>

#include "doctest.h"
#include "muxsim/kv_manager.hpp"
#include "muxsim/rng.hpp"

using namespace muxsim;

namespace {

LLMSpec spec_7b() { return {"7b", 32, 32, 128, 4096, 13'500'000'000LL, 2}; }
// Tiny architecture for readable block math: 1 layer, 1 head -> a 16-token
// row costs 2 blocks.
LLMSpec spec_tiny(const char* name) { return {name, 1, 1, 128, 4096, 1000, 2}; }

}  // namespace

TEST_CASE("memory layout carves weights, reserve, and kv") {
  MemoryLayout l = MemoryLayout::for_mesh(100, 30, 0.1);
  CHECK(l.weights_bytes == 30);
  CHECK(l.activation_reserve_bytes == 10);
  CHECK(l.kv_bytes == 60);
  CHECK_THROWS_AS(MemoryLayout::for_mesh(100, 95, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(MemoryLayout::for_mesh(0, 0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(MemoryLayout::for_mesh(100, 10, 1.0), std::invalid_argument);
}

TEST_CASE("block geometry") {
  LLMSpec s7 = spec_7b();
  SUBCASE("amortised blocks per token") {
    CHECK(blocks_per_token(s7, 16) == doctest::Approx(128.0));  // 2*32*32/16
    CHECK(blocks_per_token(spec_tiny("t"), 16) == doctest::Approx(0.125));
  }
  SUBCASE("whole rows per request") {
    CHECK(blocks_for_tokens(s7, 16, 0) == 0);
    CHECK(blocks_for_tokens(s7, 16, 1) == 2048);
    CHECK(blocks_for_tokens(s7, 16, 16) == 2048);
    CHECK(blocks_for_tokens(s7, 16, 17) == 4096);
  }
  SUBCASE("bytes per block") {
    CHECK(block_bytes(s7, 16) == 4096);  // 128 * 16 * 2
  }
  SUBCASE("rejects bad arguments") {
    CHECK_THROWS_AS(blocks_per_token(s7, 0), std::invalid_argument);
    CHECK_THROWS_AS(blocks_for_tokens(s7, 16, -1), std::invalid_argument);
  }
}

TEST_CASE("block pool alloc and free") {
  LLMSpec ta = spec_tiny("a"), tb = spec_tiny("b");
  BlockPool pool(10);
  pool.register_llm(0, &ta, 16);
  pool.register_llm(1, &tb, 16);
  pool.set_quota(0, 6);
  pool.set_quota(1, 4);

  SUBCASE("growth allocates only the block delta") {
    CHECK(pool.alloc(0, 1, 16, true).ok);  // one row: 2 blocks
    CHECK(pool.used(0) == 2);
    CHECK(pool.alloc(0, 1, 1, false).ok);  // crosses into a second row
    CHECK(pool.used(0) == 4);
    CHECK(pool.request_tokens(0, 1) == 17);
    CHECK(pool.alloc(0, 1, 15, false).ok);  // fills the row: no new blocks
    CHECK(pool.used(0) == 4);
    pool.free_request(0, 1);
    CHECK(pool.used(0) == 0);
    CHECK(pool.free_blocks() == 10);
  }
  SUBCASE("quota rejections precede pool rejections and change nothing") {
    REQUIRE(pool.alloc(0, 1, 48, true).ok);  // 6 blocks, at quota
    AllocResult r = pool.alloc(0, 2, 16, true);
    CHECK_FALSE(r.ok);
    CHECK(r.error == AllocError::Quota);
    CHECK(pool.used(0) == 6);
    CHECK(pool.free_blocks() == 4);
    CHECK(pool.request_tokens(0, 2) == 0);
    // Decode-style growth ignores the quota but not the pool.
    CHECK(pool.alloc(0, 2, 16, false).ok);
    CHECK(pool.used(0) == 8);
    r = pool.alloc(1, 3, 48, false);  // needs 6, only 2 free
    CHECK_FALSE(r.ok);
    CHECK(r.error == AllocError::Pool);
    CHECK(pool.used(1) == 0);
    pool.check_conservation();
  }
  SUBCASE("zero-token alloc is a no-op that registers the request") {
    CHECK(pool.alloc(0, 9, 0, true).ok);
    CHECK(pool.used(0) == 0);
    CHECK_NOTHROW(pool.free_request(0, 9));
  }
  SUBCASE("unknown requests and models are hard errors") {
    CHECK_THROWS_AS(pool.free_request(0, 12345), std::logic_error);
    CHECK_THROWS_AS(pool.alloc(7, 1, 16, true), std::logic_error);
    CHECK_THROWS_AS((void)pool.quota(2), std::logic_error);
  }
}

TEST_CASE("admission reserves the final footprint") {
  LLMSpec ta = spec_tiny("a"), tb = spec_tiny("b");

  SUBCASE("the reservation counts against the quota up front") {
    BlockPool pool(20);
    pool.register_llm(0, &ta, 16);
    pool.set_quota(0, 10);
    CHECK(pool.admit(0, 1, 16, 48).ok);  // worst case 3 rows: 6 blocks
    CHECK(pool.used(0) == 2);            // only the prompt row is materialised
    CHECK(pool.committed(0) == 6);
    AllocResult r = pool.admit(0, 2, 16, 80);  // would commit 16 > quota 10
    CHECK_FALSE(r.ok);
    CHECK(r.error == AllocError::Quota);
    CHECK(pool.used(0) == 2);
    CHECK(pool.committed(0) == 6);
    CHECK(pool.admit(0, 2, 16, 32).ok);  // 4 more lands exactly at the quota
    CHECK(pool.committed(0) == 10);
    pool.check_conservation();
  }

  SUBCASE("growth inside the reservation is pre-paid") {
    BlockPool pool(20);
    pool.register_llm(0, &ta, 16);
    pool.set_quota(0, 10);
    REQUIRE(pool.admit(0, 1, 16, 48).ok);
    CHECK(pool.alloc(0, 1, 16, false).ok);  // second row materialises
    CHECK(pool.used(0) == 4);
    CHECK(pool.committed(0) == 6);  // unchanged: growth was already counted
    CHECK(pool.alloc(0, 1, 16, false).ok);
    CHECK(pool.used(0) == 6);
    CHECK(pool.committed(0) == 6);
    pool.free_request(0, 1);
    CHECK(pool.committed(0) == 0);
    CHECK(pool.free_blocks() == 20);
    pool.check_conservation();
  }

  SUBCASE("the pool gate sees other models' reservations") {
    BlockPool pool(10);
    pool.register_llm(0, &ta, 16);
    pool.register_llm(1, &tb, 16);
    pool.set_quota(0, 10);
    pool.set_quota(1, 10);
    REQUIRE(pool.admit(0, 1, 16, 64).ok);  // commits 8 of the 10 blocks
    AllocResult r = pool.admit(1, 2, 16, 32);
    CHECK_FALSE(r.ok);  // 4 more than the 2 uncommitted blocks
    CHECK(r.error == AllocError::Pool);
    CHECK(pool.used(1) == 0);
    pool.free_request(0, 1);  // releases the reservation with the blocks
    CHECK(pool.admit(1, 2, 16, 32).ok);
    CHECK(pool.committed(1) == 4);
    pool.check_conservation();
  }

  SUBCASE("reservation-less allocations count at their plain usage") {
    BlockPool pool(20);
    pool.register_llm(0, &ta, 16);
    pool.set_quota(0, 20);
    CHECK(pool.alloc(0, 1, 16, true).ok);  // no admission, no reservation
    CHECK(pool.committed(0) == 2);
    CHECK(pool.alloc(0, 1, 16, false).ok);
    CHECK(pool.committed(0) == 4);  // tracks usage once past any reservation
    pool.check_conservation();
  }

  SUBCASE("every admitted request can always run to completion") {
    // Admit to the brim, then interleave single-token growth: the commitment
    // accounting guarantees each decode-step allocation finds a free row.
    BlockPool pool(12);
    pool.register_llm(0, &ta, 16);
    pool.set_quota(0, 12);
    REQUIRE(pool.admit(0, 1, 16, 48).ok);
    REQUIRE(pool.admit(0, 2, 16, 48).ok);
    CHECK(pool.committed(0) == 12);
    CHECK_FALSE(pool.admit(0, 3, 16, 16).ok);
    for (int t = 17; t <= 48; ++t) {
      CHECK(pool.alloc(0, 1, 1, false).ok);
      CHECK(pool.alloc(0, 2, 1, false).ok);
    }
    CHECK(pool.used(0) == 12);
    pool.free_request(0, 1);
    pool.free_request(0, 2);
    CHECK(pool.free_blocks() == 12);
    pool.check_conservation();
  }

  SUBCASE("double admission and degenerate footprints are hard errors") {
    BlockPool pool(20);
    pool.register_llm(0, &ta, 16);
    pool.set_quota(0, 20);
    REQUIRE(pool.admit(0, 1, 16, 16).ok);
    CHECK_THROWS_AS((void)pool.admit(0, 1, 16, 32), std::logic_error);
    CHECK_THROWS_AS((void)pool.admit(0, 2, 0, 16), std::logic_error);
    CHECK_THROWS_AS((void)pool.admit(0, 2, 16, 8), std::logic_error);
  }
}

TEST_CASE("initial quotas split the pool by demand, frozen values") {
  SUBCASE("rates one to eight") {
    std::vector<QuotaInput> in = {{1.0, 128.0, 1000.0}, {8.0, 128.0, 1000.0}};
    std::vector<std::int64_t> q = init_token_block_quota(in, 1000, 0.02);
    CHECK(q == std::vector<std::int64_t>{111, 889});
  }
  SUBCASE("three-way split with unequal request sizes") {
    std::vector<QuotaInput> in = {{2.0, 1.0, 2.0}, {8.0, 1.0, 1.0}, {8.0, 1.0, 1.0}};
    std::vector<std::int64_t> q = init_token_block_quota(in, 1000, 0.02);
    CHECK(q == std::vector<std::int64_t>{200, 400, 400});
  }
  SUBCASE("the floor protects a tiny model") {
    std::vector<QuotaInput> in = {{999.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
    std::vector<std::int64_t> q = init_token_block_quota(in, 1000, 0.02);
    CHECK(q == std::vector<std::int64_t>{980, 20});
  }
  SUBCASE("zero demand splits evenly with deterministic rounding") {
    std::vector<QuotaInput> in = {{0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}};
    std::vector<std::int64_t> q = init_token_block_quota(in, 1001, 0.02);
    CHECK(q == std::vector<std::int64_t>{501, 500});
  }
  SUBCASE("two pinned models") {
    std::vector<QuotaInput> in = {{1000.0, 1.0, 1.0}, {2.0, 1.0, 1.0}, {1.0, 1.0, 1.0}};
    std::vector<std::int64_t> q = init_token_block_quota(in, 600, 0.05);
    CHECK(q == std::vector<std::int64_t>{540, 30, 30});
  }
  SUBCASE("quotas always sum to the pool") {
    Rng rng(3, "quota");
    for (int trial = 0; trial < 200; ++trial) {
      int n = 1 + static_cast<int>(rng.uniform01() * 6);
      std::vector<QuotaInput> in;
      for (int i = 0; i < n; ++i)
        in.push_back({rng.uniform01() * 10.0, rng.uniform01() * 200.0, rng.uniform01() * 800.0});
      std::int64_t kv = 100 + static_cast<std::int64_t>(rng.uniform01() * 100000);
      std::vector<std::int64_t> q = init_token_block_quota(in, kv, 0.02);
      CHECK(std::accumulate(q.begin(), q.end(), std::int64_t{0}) == kv);
      for (std::int64_t one : q) CHECK(one >= 0);
    }
  }
  SUBCASE("rejects bad arguments") {
    CHECK_THROWS_AS(init_token_block_quota({}, 100, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(init_token_block_quota({{1, 1, 1}}, 0, 0.02), std::invalid_argument);
    CHECK_THROWS_AS(init_token_block_quota({{1, 1, 1}}, 100, 1.0), std::invalid_argument);
  }
}

TEST_CASE("quota adaptation shifts blocks from idle to starved") {
  SUBCASE("one donor, one receiver, frozen") {
    std::vector<std::int64_t> q = adapt_quota({0.2, 0.95}, {500, 500}, 20, {});
    CHECK(q == std::vector<std::int64_t>{450, 550});
  }
  SUBCASE("donation clamps at the floor") {
    std::vector<std::int64_t> q = adapt_quota({0.1, 0.95}, {25, 500}, 20, {});
    CHECK(q == std::vector<std::int64_t>{22, 503});
  }
  SUBCASE("no starved model leaves quotas unchanged") {
    std::vector<std::int64_t> q = adapt_quota({0.1, 0.7}, {500, 500}, 20, {});
    CHECK(q == std::vector<std::int64_t>{500, 500});
  }
  SUBCASE("no idle model leaves quotas unchanged") {
    std::vector<std::int64_t> q = adapt_quota({0.8, 0.95}, {500, 500}, 20, {});
    CHECK(q == std::vector<std::int64_t>{500, 500});
  }
  SUBCASE("a single model never moves") {
    CHECK(adapt_quota({0.99}, {800}, 20, {}) == std::vector<std::int64_t>{800});
    CHECK(adapt_quota({0.0}, {800}, 20, {}) == std::vector<std::int64_t>{800});
  }
  SUBCASE("utilizations outside [0,1] are clamped") {
    std::vector<std::int64_t> q = adapt_quota({-3.0, 7.0}, {500, 500}, 20, {});
    CHECK(q == std::vector<std::int64_t>{450, 550});
  }
  SUBCASE("the quota sum is always preserved") {
    Rng rng(4, "adapt");
    for (int trial = 0; trial < 500; ++trial) {
      int n = 1 + static_cast<int>(rng.uniform01() * 5);
      std::vector<double> utils;
      std::vector<std::int64_t> quotas;
      std::int64_t floor = static_cast<std::int64_t>(rng.uniform01() * 30);
      for (int i = 0; i < n; ++i) {
        utils.push_back(rng.uniform01() * 1.4 - 0.2);
        quotas.push_back(floor + static_cast<std::int64_t>(rng.uniform01() * 2000));
      }
      std::int64_t before = std::accumulate(quotas.begin(), quotas.end(), std::int64_t{0});
      std::vector<std::int64_t> after = adapt_quota(utils, quotas, floor, {});
      CHECK(std::accumulate(after.begin(), after.end(), std::int64_t{0}) == before);
      for (size_t i = 0; i < after.size(); ++i) {
        // Donors never cross the floor; receivers never lose.
        if (after[i] < quotas[i]) CHECK(after[i] >= floor);
      }
    }
  }
}

// Model-based fuzz: a naive shadow (per-request token counts recomputed from
// scratch) must agree with the pool after every operation.
TEST_CASE("randomized pool operations against a shadow model") {
  LLMSpec specs[3] = {spec_tiny("f0"), spec_tiny("f1"), spec_tiny("f2")};
  const std::int64_t total = 400;
  BlockPool pool(total);
  for (int i = 0; i < 3; ++i) pool.register_llm(i, &specs[i], 16);
  std::vector<std::int64_t> quota = {150, 150, 100};
  for (int i = 0; i < 3; ++i) pool.set_quota(i, quota[i]);

  std::map<std::pair<int, std::int64_t>, std::int64_t> shadow;  // (llm, req) -> tokens
  auto shadow_used = [&](int llm) {
    std::int64_t sum = 0;
    for (const auto& [key, tokens] : shadow)
      if (key.first == llm) sum += blocks_for_tokens(specs[llm], 16, tokens);
    return sum;
  };

  Rng rng(99, "fuzz");
  std::int64_t next_req = 0;
  int checked = 0;
  for (int op = 0; op < 10000; ++op) {
    double pick = rng.uniform01();
    int llm = static_cast<int>(rng.uniform01() * 3);
    if (pick < 0.55) {  // grow a request (existing or fresh)
      std::int64_t rid;
      bool fresh = shadow.empty() || rng.uniform01() < 0.4;
      if (fresh) {
        rid = next_req++;
      } else {
        auto it = shadow.begin();
        std::advance(it, static_cast<std::int64_t>(rng.uniform01() * shadow.size()));
        llm = it->first.first;
        rid = it->first.second;
      }
      std::int64_t add = static_cast<std::int64_t>(rng.uniform01() * 40);
      bool enforce = rng.uniform01() < 0.5;
      std::int64_t before_tokens = 0;
      auto sit = shadow.find({llm, rid});
      if (sit != shadow.end()) before_tokens = sit->second;
      std::int64_t delta = blocks_for_tokens(specs[llm], 16, before_tokens + add) -
                           blocks_for_tokens(specs[llm], 16, before_tokens);
      bool quota_ok = !enforce || pool.used(llm) + delta <= pool.quota(llm);
      bool pool_ok = delta <= pool.free_blocks();
      AllocResult r = pool.alloc(llm, rid, add, enforce);
      CHECK(r.ok == (quota_ok && pool_ok));
      if (r.ok) shadow[{llm, rid}] = before_tokens + add;
    } else if (pick < 0.8 && !shadow.empty()) {  // free one request
      auto it = shadow.begin();
      std::advance(it, static_cast<std::int64_t>(rng.uniform01() * shadow.size()));
      pool.free_request(it->first.first, it->first.second);
      shadow.erase(it);
    } else {  // adapt quotas from synthetic utilizations
      std::vector<double> utils;
      std::vector<std::int64_t> quotas;
      for (int i = 0; i < 3; ++i) {
        utils.push_back(rng.uniform01() * 1.2);
        quotas.push_back(pool.quota(i));
      }
      std::vector<std::int64_t> next = adapt_quota(utils, quotas, 10, {});
      CHECK(std::accumulate(next.begin(), next.end(), std::int64_t{0}) ==
            std::accumulate(quotas.begin(), quotas.end(), std::int64_t{0}));
      for (int i = 0; i < 3; ++i) pool.set_quota(i, next[i]);
    }
    std::int64_t used_total = 0;
    for (int i = 0; i < 3; ++i) {
      CHECK(pool.used(i) == shadow_used(i));
      used_total += pool.used(i);
    }
    CHECK(used_total + pool.free_blocks() == total);
    pool.check_conservation();
    ++checked;
  }
  CHECK(checked == 10000);
}
