// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include "sarstream/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace sarstream::eval {

double CostModel::block_cost(int frames) const {
  if (mode != Mode::synthetic)
    throw InputError("CostModel: wallclock costs must be measured, not derived");
  return c * static_cast<double>(frames) * static_cast<double>(frames);
}

double mean_latency(std::span<const LatencyEvent> events) {
  if (events.empty()) throw InputError("mean_latency: no events");
  double total = 0.0;
  for (const auto& e : events) total += e.last_emit_s - e.duration_s;
  return total / static_cast<double>(events.size());
}

namespace {

std::vector<double> schedule_impl(const std::vector<blocking::Block>& blocks,
                                  std::span<const double> proc_s, double frame_duration) {
  std::vector<double> completion(blocks.size());
  double prev = 0.0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const double availability = blocks[b].end * frame_duration;
    prev = std::max(availability, prev) + proc_s[b];
    completion[b] = prev;
  }
  return completion;
}

}  // namespace

std::vector<double> block_schedule(int t_total, const blocking::BlockSpec& spec,
                                   const CostModel& cost, double frame_duration) {
  const auto blocks = blocking::make_blocks(t_total, spec);
  std::vector<double> proc(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) proc[b] = cost.block_cost(blocks[b].frames());
  return schedule_impl(blocks, proc, frame_duration);
}

std::vector<double> block_schedule(int t_total, const blocking::BlockSpec& spec,
                                   std::span<const double> proc_s, double frame_duration) {
  const auto blocks = blocking::make_blocks(t_total, spec);
  if (proc_s.size() != blocks.size())
    throw InputError("block_schedule: one processing time per block required");
  return schedule_impl(blocks, proc_s, frame_duration);
}

double WerReport::corpus_wer() const {
  const long denom = std::max(1L, total_ref_len);
  return 100.0 * static_cast<double>(totals.total()) / static_cast<double>(denom);
}

WerReport wer_report(std::span<const core::Transcript> refs,
                     std::span<const core::Transcript> hyps) {
  std::unordered_map<std::string, const core::Transcript*> by_id;
  for (const auto& h : hyps) by_id[h.utt_id] = &h;
  if (by_id.size() != hyps.size()) throw InputError("wer_report: duplicate hypothesis ids");

  WerReport report;
  for (const auto& ref : refs) {
    auto it = by_id.find(ref.utt_id);
    if (it == by_id.end())
      throw InputError("wer_report: missing hypothesis for " + ref.utt_id);
    const auto counts = core::edit_distance(ref.tokens, it->second->tokens);
    report.per_utt.push_back({ref.utt_id, counts, static_cast<int>(ref.tokens.size())});
    report.totals.sub += counts.sub;
    report.totals.del += counts.del;
    report.totals.ins += counts.ins;
    report.total_ref_len += static_cast<long>(ref.tokens.size());
  }
  return report;
}

namespace {

// P(X <= k) for X ~ Binomial(n, 1/2), exact.
double binom_half_cdf(int k, int n) {
  // log C(n, i) built incrementally to stay stable for n up to a few hundred.
  double acc = 0.0;
  double log_c = 0.0;  // log C(n, 0)
  const double log_half_n = -static_cast<double>(n) * std::log(2.0);
  for (int i = 0; i <= k; ++i) {
    if (i > 0) log_c += std::log(static_cast<double>(n - i + 1)) - std::log(static_cast<double>(i));
    acc += std::exp(log_c + log_half_n);
  }
  return std::min(1.0, acc);
}

// Two-sided p-value for k successes out of n fair-coin trials.
double two_sided_binom(int k, int n) {
  if (n == 0) return 1.0;
  if (n <= 50) {
    const int lo = std::min(k, n - k);
    return std::min(1.0, 2.0 * binom_half_cdf(lo, n));
  }
  const double z = (std::abs(static_cast<double>(k) - n / 2.0) - 0.5) /
                   std::sqrt(n / 4.0);
  return std::erfc(std::max(0.0, z) / std::sqrt(2.0));
}

}  // namespace

PairTestResult matched_pair_test(std::span<const int> errors_p,
                                 std::span<const int> errors_q) {
  if (errors_p.size() != errors_q.size())
    throw InputError("matched_pair_test: unpaired data");
  PairTestResult result;
  int correct_flip_pq = 0;  // P correct, Q wrong
  int correct_flip_qp = 0;
  for (std::size_t i = 0; i < errors_p.size(); ++i) {
    if (errors_p[i] < errors_q[i]) ++result.wins_p;
    if (errors_q[i] < errors_p[i]) ++result.wins_q;
    const bool p_ok = errors_p[i] == 0;
    const bool q_ok = errors_q[i] == 0;
    if (p_ok && !q_ok) ++correct_flip_pq;
    if (!p_ok && q_ok) ++correct_flip_qp;
  }
  result.sign_p = two_sided_binom(result.wins_p, result.wins_p + result.wins_q);
  result.mcnemar_p = two_sided_binom(correct_flip_pq, correct_flip_pq + correct_flip_qp);
  return result;
}

}  // namespace sarstream::eval
