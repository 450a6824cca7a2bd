// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>

#include "doctest.h"
#include "sarstream/blocking.hpp"

using namespace sarstream;
using namespace sarstream::blocking;

namespace {
const BlockSpec kDefault{40, 16, 8, 16};
}

TEST_SUITE("blocking") {

TEST_CASE("make_blocks on the 56-frame example") {
  // 1-based spec trace: block1 [1,40] win [1,24]; block2 [17,56] win [25,40];
  // block3 [33,56] win [41,56]. Stored 0-based half-open.
  const auto blocks = make_blocks(56, kDefault);
  REQUIRE(blocks.size() == 3);
  CHECK(blocks[0].begin == 0);
  CHECK(blocks[0].end == 40);
  CHECK(blocks[0].win_begin == 0);
  CHECK(blocks[0].win_end == 24);
  CHECK(blocks[1].begin == 16);
  CHECK(blocks[1].end == 56);
  CHECK(blocks[1].win_begin == 24);
  CHECK(blocks[1].win_end == 40);
  CHECK(blocks[2].begin == 32);
  CHECK(blocks[2].end == 56);
  CHECK(blocks[2].win_begin == 40);
  CHECK(blocks[2].win_end == 56);
}

TEST_CASE("utterances that fit one block stay one block") {
  for (int t : {10, 40}) {
    const auto blocks = make_blocks(t, kDefault);
    REQUIRE(blocks.size() == 1);
    CHECK(blocks[0].begin == 0);
    CHECK(blocks[0].end == t);
    CHECK(blocks[0].win_begin == 0);
    CHECK(blocks[0].win_end == t);
  }
}

TEST_CASE("make_blocks rejects empty input") {
  CHECK_THROWS_AS(make_blocks(0, kDefault), InputError);
  CHECK_THROWS_AS(make_blocks(-3, kDefault), InputError);
}

TEST_CASE("central_window examples") {
  CHECK(central_window(1, kDefault, 56) == std::pair{24, 40});
  CHECK(central_window(0, kDefault, 56) == std::pair{0, 24});
  CHECK(central_window(2, kDefault, 56).second == 56);
  CHECK_THROWS_AS(central_window(3, kDefault, 56), InputError);
  CHECK_THROWS_AS(central_window(-1, kDefault, 56), InputError);
}

TEST_CASE("central windows tile the utterance exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n_l = static_cast<int>(rng.uniform_int(0, 12));
    const int n_r = static_cast<int>(rng.uniform_int(0, 12));
    const int l_hop = static_cast<int>(rng.uniform_int(1, 24));
    const BlockSpec spec{n_l + l_hop + n_r, l_hop, n_l, n_r};
    const int t_total = static_cast<int>(rng.uniform_int(1, 400));
    const auto blocks = make_blocks(t_total, spec);
    REQUIRE(!blocks.empty());
    int expected_start = 0;
    for (const auto& b : blocks) {
      CHECK(b.win_begin == expected_start);
      CHECK(b.win_end > b.win_begin);
      CHECK(b.win_begin >= b.begin);
      CHECK(b.win_end <= b.end);
      expected_start = b.win_end;
    }
    CHECK(expected_start == t_total);
  }
}

TEST_CASE("consecutive blocks advance by exactly l_hop") {
  Rng rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    const int l_hop = static_cast<int>(rng.uniform_int(1, 20));
    const BlockSpec spec{4 + l_hop + 6, l_hop, 4, 6};
    const int t_total = static_cast<int>(rng.uniform_int(1, 300));
    const auto blocks = make_blocks(t_total, spec);
    for (std::size_t i = 1; i < blocks.size(); ++i)
      CHECK(blocks[i].begin - blocks[i - 1].begin == l_hop);
  }
}

TEST_CASE("sample_block_size stays in range and rescales the hop") {
  Rng rng(33);
  for (int i = 0; i < 100; ++i) {
    const auto spec = sample_block_size(rng, 35, 45, kDefault);
    CHECK(spec.l_block >= 35);
    CHECK(spec.l_block <= 45);
    CHECK(spec.n_l == 8);
    CHECK(spec.n_r == 16);
    CHECK(spec.l_block == spec.n_l + spec.l_hop + spec.n_r);
  }
}

TEST_CASE("degenerate range is deterministic") {
  Rng rng(34);
  const auto spec = sample_block_size(rng, 40, 40, kDefault);
  CHECK(spec.l_block == 40);
  CHECK(spec.l_hop == 16);
}

TEST_CASE("sample_block_size rejects sizes without a window") {
  Rng rng(35);
  CHECK_THROWS_AS(sample_block_size(rng, 10, 20, kDefault), InputError);
  CHECK_THROWS_AS(sample_block_size(rng, 45, 35, kDefault), InputError);
}

TEST_CASE("sampled sizes are uniform (chi-square within 5 sigma)") {
  Rng rng(36);
  const int lo = 35, hi = 45, draws = 10000;
  std::map<int, int> freq;
  for (int i = 0; i < draws; ++i) freq[sample_block_size(rng, lo, hi, kDefault).l_block]++;
  const int k = hi - lo + 1;
  const double expected = static_cast<double>(draws) / k;
  double chi2 = 0.0;
  for (int v = lo; v <= hi; ++v) {
    const double diff = freq[v] - expected;
    chi2 += diff * diff / expected;
  }
  // chi-square with k-1=10 dof: mean 10, variance 20. 5 sigma above mean.
  CHECK(chi2 < 10.0 + 5.0 * std::sqrt(20.0));
  // And every value must actually occur at this sample size.
  CHECK(static_cast<int>(freq.size()) == k);
}

}  // TEST_SUITE
