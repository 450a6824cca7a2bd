// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// WER aggregation, the streaming latency metric, the block completion-time
// schedule, and matched-pair significance tests.

#pragma once

#include <span>
#include <string>
#include <vector>

#include "sarstream/blocking.hpp"
#include "sarstream/core.hpp"

namespace sarstream::eval {

struct LatencyEvent {
  std::string utt_id;
  double duration_s;   // T * frame_duration
  double last_emit_s;  // timestamp of the final token emission
};

// Per-block processing cost. Synthetic mode charges c seconds per frame^2,
// which keeps latency results machine-independent; wallclock mode uses
// measured times supplied by the caller.
struct CostModel {
  enum class Mode { synthetic, wallclock };
  Mode mode = Mode::synthetic;
  double c = 1e-6;  // seconds per frame^2 (synthetic mode)

  double block_cost(int frames) const;
};

// Mean over utterances of (last emission - speech duration). Near zero, or
// negative, for streaming decoders whose last token lands before the audio
// ends.
double mean_latency(std::span<const LatencyEvent> events);

// Completion times per block: a block may start processing once its last
// frame has arrived and the previous block has finished.
//   completion(b) = max(availability(b), completion(b-1)) + proc(b)
// Synthetic cost model only; use the proc_s overload for measured times.
std::vector<double> block_schedule(int t_total, const blocking::BlockSpec& spec,
                                   const CostModel& cost, double frame_duration);
std::vector<double> block_schedule(int t_total, const blocking::BlockSpec& spec,
                                   std::span<const double> proc_s, double frame_duration);

struct UttErrors {
  std::string utt_id;
  core::EditCounts counts;
  int ref_len = 0;
};

struct WerReport {
  std::vector<UttErrors> per_utt;
  core::EditCounts totals;
  long total_ref_len = 0;

  // (S + D + I) / sum(ref length), as a percentage.
  double corpus_wer() const;
};

// Pairs refs and hyps by utt_id; every ref id must have a hypothesis.
WerReport wer_report(std::span<const core::Transcript> refs,
                     std::span<const core::Transcript> hyps);

struct PairTestResult {
  double sign_p = 1.0;      // two-sided sign test on per-utterance error counts
  double mcnemar_p = 1.0;   // two-sided McNemar on utterance-level correctness
  int wins_p = 0;           // utterances where system P has fewer errors
  int wins_q = 0;
};

// Error counts are paired by index (callers align by utt_id). Exact binomial
// tails are used for n <= 50 discordant pairs, a continuity-corrected normal
// approximation above. Identical systems give p = 1.
PairTestResult matched_pair_test(std::span<const int> errors_p,
                                 std::span<const int> errors_q);

}  // namespace sarstream::eval
