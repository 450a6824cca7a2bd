// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include "sarstream/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace sarstream::ctc {

namespace {

constexpr double kLogZeroGuard = -1e29;  // anything below counts as log(0)

std::vector<int> expand_labels(std::span<const int> y, int blank) {
  std::vector<int> ext;
  ext.reserve(2 * y.size() + 1);
  ext.push_back(blank);
  for (int tok : y) {
    ext.push_back(tok);
    ext.push_back(blank);
  }
  return ext;
}

int required_frames(std::span<const int> y) {
  int repeats = 0;
  for (std::size_t i = 1; i < y.size(); ++i)
    if (y[i] == y[i - 1]) ++repeats;
  return static_cast<int>(y.size()) + repeats;
}

void check_alignable(const Matrix& log_probs, std::span<const int> y, int blank) {
  for (int tok : y) {
    if (tok < 0 || tok >= log_probs.cols())
      throw InputError("ctc: transcript token out of vocabulary range");
    if (tok == blank) throw InputError("ctc: transcript must not contain blank");
  }
  if (required_frames(y) > log_probs.rows())
    throw InputError("ctc: transcript too long for " + std::to_string(log_probs.rows()) +
                     " frames");
}

// Forward (alpha) pass over the expanded lattice; returns the T x S table.
Matrix forward_table(const Matrix& lp, const std::vector<int>& ext) {
  const int t_total = lp.rows();
  const int s_total = static_cast<int>(ext.size());
  Matrix alpha = Matrix::filled(t_total, s_total, kLogZero);
  alpha(0, 0) = lp(0, ext[0]);
  if (s_total > 1) alpha(0, 1) = lp(0, ext[1]);
  for (int t = 1; t < t_total; ++t) {
    for (int s = 0; s < s_total; ++s) {
      double acc = alpha(t - 1, s);
      if (s >= 1) acc = log_add(acc, alpha(t - 1, s - 1));
      // Skipping a state is only valid over a blank between distinct tokens;
      // ext alternates blank/token, so ext[s] != ext[s-2] captures exactly that.
      if (s >= 2 && ext[s] != ext[s - 2]) acc = log_add(acc, alpha(t - 1, s - 2));
      alpha(t, s) = (acc <= kLogZeroGuard) ? kLogZero : acc + lp(t, ext[s]);
    }
  }
  return alpha;
}

}  // namespace

double log_add(double a, double b) {
  if (a <= kLogZeroGuard) return b;
  if (b <= kLogZeroGuard) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

double ctc_loss(const Matrix& log_probs, std::span<const int> y, int blank) {
  check_alignable(log_probs, y, blank);
  const auto ext = expand_labels(y, blank);
  const Matrix alpha = forward_table(log_probs, ext);
  const int t_last = log_probs.rows() - 1;
  const int s_total = static_cast<int>(ext.size());
  double total = alpha(t_last, s_total - 1);
  if (s_total > 1) total = log_add(total, alpha(t_last, s_total - 2));
  if (total <= kLogZeroGuard)
    throw InputError("ctc: no valid alignment has nonzero probability");
  return -total;
}

LossAndGrad ctc_loss_grad(const Matrix& log_probs, std::span<const int> y, int blank) {
  check_alignable(log_probs, y, blank);
  const auto ext = expand_labels(y, blank);
  const int t_total = log_probs.rows();
  const int s_total = static_cast<int>(ext.size());
  const Matrix alpha = forward_table(log_probs, ext);

  // Exclusive beta: probability of finishing from state s after frame t.
  Matrix beta = Matrix::filled(t_total, s_total, kLogZero);
  beta(t_total - 1, s_total - 1) = 0.0;
  if (s_total > 1) beta(t_total - 1, s_total - 2) = 0.0;
  for (int t = t_total - 2; t >= 0; --t) {
    for (int s = 0; s < s_total; ++s) {
      double acc = kLogZero;
      // stay
      if (beta(t + 1, s) > kLogZeroGuard)
        acc = log_add(acc, beta(t + 1, s) + log_probs(t + 1, ext[s]));
      // advance one
      if (s + 1 < s_total && beta(t + 1, s + 1) > kLogZeroGuard)
        acc = log_add(acc, beta(t + 1, s + 1) + log_probs(t + 1, ext[s + 1]));
      // skip a blank between distinct tokens
      if (s + 2 < s_total && ext[s + 2] != ext[s] && beta(t + 1, s + 2) > kLogZeroGuard)
        acc = log_add(acc, beta(t + 1, s + 2) + log_probs(t + 1, ext[s + 2]));
      beta(t, s) = acc;
    }
  }

  const int t_last = t_total - 1;
  double log_p = alpha(t_last, s_total - 1);
  if (s_total > 1) log_p = log_add(log_p, alpha(t_last, s_total - 2));
  if (log_p <= kLogZeroGuard)
    throw InputError("ctc: no valid alignment has nonzero probability");

  // d(-log P)/d(lp[t][k]) = -sum_{s: ext[s]=k} exp(alpha[t][s]+beta[t][s]-log P)
  Matrix grad(t_total, log_probs.cols());
  for (int t = 0; t < t_total; ++t) {
    for (int s = 0; s < s_total; ++s) {
      const double a = alpha(t, s);
      const double b = beta(t, s);
      if (a <= kLogZeroGuard || b <= kLogZeroGuard) continue;
      grad(t, ext[s]) -= std::exp(a + b - log_p);
    }
  }
  return {-log_p, std::move(grad)};
}

std::vector<int> ctc_forced_align(const Matrix& log_probs, std::span<const int> y,
                                  int blank) {
  check_alignable(log_probs, y, blank);
  const auto ext = expand_labels(y, blank);
  const int t_total = log_probs.rows();
  const int s_total = static_cast<int>(ext.size());

  Matrix score = Matrix::filled(t_total, s_total, kLogZero);
  std::vector<int> from(static_cast<std::size_t>(t_total) * s_total, -1);
  auto from_at = [s_total](int t, int s) {
    return static_cast<std::size_t>(t) * s_total + s;
  };

  score(0, 0) = log_probs(0, ext[0]);
  if (s_total > 1) score(0, 1) = log_probs(0, ext[1]);
  for (int t = 1; t < t_total; ++t) {
    for (int s = 0; s < s_total; ++s) {
      // Candidates in tie-break order: stay, advance one, skip two.
      double best = score(t - 1, s);
      int arg = s;
      if (s >= 1 && score(t - 1, s - 1) > best) {
        best = score(t - 1, s - 1);
        arg = s - 1;
      }
      if (s >= 2 && ext[s] != ext[s - 2] && ext[s] != ext[s - 1] &&
          score(t - 1, s - 2) > best) {
        best = score(t - 1, s - 2);
        arg = s - 2;
      }
      if (best <= kLogZeroGuard) continue;
      score(t, s) = best + log_probs(t, ext[s]);
      from[from_at(t, s)] = arg;
    }
  }

  // End in the final token state or the trailing blank; on a tie prefer the
  // token state (the path that stayed rather than advanced to blank).
  int s_end = s_total - 1;
  if (s_total > 1 && score(t_total - 1, s_total - 2) >= score(t_total - 1, s_total - 1))
    s_end = s_total - 2;
  if (score(t_total - 1, s_end) <= kLogZeroGuard)
    throw InputError("ctc: no valid alignment has nonzero probability");

  std::vector<int> labels(static_cast<std::size_t>(t_total));
  int s = s_end;
  for (int t = t_total - 1; t >= 0; --t) {
    labels[static_cast<std::size_t>(t)] = ext[static_cast<std::size_t>(s)];
    if (t > 0) s = from[from_at(t, s)];
  }
  return labels;
}

std::vector<int> best_path(const Matrix& log_probs) {
  std::vector<int> labels(static_cast<std::size_t>(log_probs.rows()));
  for (int t = 0; t < log_probs.rows(); ++t) {
    const double* row = log_probs.row(t);
    int arg = 0;
    for (int k = 1; k < log_probs.cols(); ++k)
      if (row[k] > row[arg]) arg = k;
    labels[static_cast<std::size_t>(t)] = arg;
  }
  return labels;
}

}  // namespace sarstream::ctc
