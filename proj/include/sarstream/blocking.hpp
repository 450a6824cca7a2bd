// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// Block geometry for streaming inference: overlapping blocks advancing by
// l_hop frames, each predicting only its central window. Frame indices are
// 0-based and ranges are half-open throughout.

#pragma once

#include <vector>

#include "sarstream/error.hpp"
#include "sarstream/rng.hpp"

namespace sarstream::blocking {

struct BlockSpec {
  int l_block = 40;  // frames per block
  int l_hop = 16;    // hop between block starts
  int n_l = 8;       // past frames excluded from the central window
  int n_r = 16;      // lookahead frames excluded from the central window

  // Enforces l_block == n_l + l_hop + n_r, l_hop >= 1, n_l/n_r >= 0.
  void validate() const;
};

struct Block {
  int index;      // 0-based
  int begin;      // first frame of the block
  int end;        // one past the last frame (clipped at t_total)
  int win_begin;  // central window start
  int win_end;    // central window end (half-open)

  int frames() const { return end - begin; }
  int win_frames() const { return win_end - win_begin; }
};

// Central windows of the returned blocks tile [0, t_total) exactly.
// A single block is used when the utterance fits inside one (t_total <=
// l_block); otherwise the first window is extended left to frame 0 and the
// last window right to t_total.
std::vector<Block> make_blocks(int t_total, const BlockSpec& spec);

// Central window of block `index` as a [begin, end) pair.
// Throws InputError when the index is outside make_blocks' output.
std::pair<int, int> central_window(int index, const BlockSpec& spec, int t_total);

// Uniform l_block in [lo, hi]; n_l and n_r are carried over from `base`
// and l_hop absorbs the size change. Used per training utterance.
BlockSpec sample_block_size(Rng& rng, int lo, int hi, const BlockSpec& base);

}  // namespace sarstream::blocking
