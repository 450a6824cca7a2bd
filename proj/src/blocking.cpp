// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include "sarstream/blocking.hpp"

#include <algorithm>
#include <string>

namespace sarstream::blocking {

void BlockSpec::validate() const {
  if (l_hop < 1) throw InputError("BlockSpec: l_hop must be positive");
  if (n_l < 0 || n_r < 0) throw InputError("BlockSpec: context sizes must be >= 0");
  if (l_block != n_l + l_hop + n_r)
    throw InputError("BlockSpec: l_block must equal n_l + l_hop + n_r");
}

std::vector<Block> make_blocks(int t_total, const BlockSpec& spec) {
  if (t_total <= 0) throw InputError("make_blocks: t_total must be positive");
  spec.validate();

  std::vector<Block> blocks;
  if (t_total <= spec.l_block) {
    blocks.push_back(Block{0, 0, t_total, 0, t_total});
    return blocks;
  }

  // B = ceil((T - n_l - l_hop) / l_hop) + 1; the numerator is positive here
  // because T > l_block >= n_l + l_hop.
  const int num = t_total - spec.n_l - spec.l_hop;
  const int count = (num + spec.l_hop - 1) / spec.l_hop + 1;

  blocks.reserve(static_cast<std::size_t>(count));
  for (int b = 0; b < count; ++b) {
    const int start = b * spec.l_hop;
    Block blk;
    blk.index = b;
    blk.begin = start;
    blk.end = std::min(start + spec.l_block, t_total);
    blk.win_begin = (b == 0) ? 0 : start + spec.n_l;
    blk.win_end = (b == count - 1) ? t_total : start + spec.n_l + spec.l_hop;
    blocks.push_back(blk);
  }
  return blocks;
}

std::pair<int, int> central_window(int index, const BlockSpec& spec, int t_total) {
  const auto blocks = make_blocks(t_total, spec);
  if (index < 0 || index >= static_cast<int>(blocks.size()))
    throw InputError("central_window: block index " + std::to_string(index) +
                     " out of range");
  const auto& b = blocks[static_cast<std::size_t>(index)];
  return {b.win_begin, b.win_end};
}

BlockSpec sample_block_size(Rng& rng, int lo, int hi, const BlockSpec& base) {
  if (lo > hi) throw InputError("sample_block_size: empty range");
  BlockSpec spec = base;
  spec.l_block = static_cast<int>(rng.uniform_int(lo, hi));
  spec.l_hop = spec.l_block - base.n_l - base.n_r;
  if (spec.l_hop <= 0)
    throw InputError("sample_block_size: block size " + std::to_string(spec.l_block) +
                     " leaves no central window");
  return spec;
}

}  // namespace sarstream::blocking
