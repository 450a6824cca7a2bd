// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// CTC over an expanded label sequence (blank, y1, blank, y2, ..., blank).
// Log-space dynamic programming; log-zero is the sentinel -1e30 so that
// impossible states stay finite instead of propagating NaNs.

#pragma once

#include <span>
#include <vector>

#include "sarstream/error.hpp"
#include "sarstream/matrix.hpp"

namespace sarstream::ctc {

inline constexpr double kLogZero = -1e30;

// log(exp(a) + exp(b)) with sentinel clamping.
double log_add(double a, double b);

// -log P(y | log_probs), summed over all valid alignments (forward
// algorithm). Throws InputError("transcript too long...") when y cannot be
// aligned in the available frames.
double ctc_loss(const Matrix& log_probs, std::span<const int> y, int blank = 0);

struct LossAndGrad {
  double loss;
  Matrix grad;  // d(loss)/d(log_probs), same shape as log_probs
};

LossAndGrad ctc_loss_grad(const Matrix& log_probs, std::span<const int> y, int blank = 0);

// Maximum-probability valid alignment of y (Viterbi over the expanded
// lattice). Ties prefer staying in the current lattice state over advancing.
std::vector<int> ctc_forced_align(const Matrix& log_probs, std::span<const int> y,
                                  int blank = 0);

// Per-frame argmax; ties break toward the lowest token id.
std::vector<int> best_path(const Matrix& log_probs);

}  // namespace sarstream::ctc
