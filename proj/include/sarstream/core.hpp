// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// Vocabulary, transcripts, frame alignments and the collapse/edit-distance
// primitives everything else is built on. All types are immutable values
// after construction; the operations are pure functions.

#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sarstream/error.hpp"
#include "sarstream/matrix.hpp"

namespace sarstream::core {

// Token inventory. Index 0 is always blank; the begin-of-sequence token sits
// in the last slot and is used only by the LM subnetwork. Posterior rows and
// alignments cover ids [0, acoustic_size()), i.e. everything except bos.
class Vocab {
 public:
  explicit Vocab(std::vector<std::string> tokens);

  // blank + `real_tokens` single-character symbols + bos.
  static Vocab synthetic(int real_tokens);

  int size() const { return static_cast<int>(tokens_.size()); }
  int acoustic_size() const { return size() - 1; }
  int blank_id() const { return 0; }
  int bos_id() const { return size() - 1; }
  const std::string& token(int id) const;
  // -1 when the string is not in the vocabulary.
  int id(std::string_view token) const;

  void save(const std::filesystem::path& file) const;
  static Vocab load(const std::filesystem::path& file);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct Transcript {
  std::string utt_id;
  std::vector<int> tokens;  // no blank, no bos
};

struct FrameAlignment {
  std::string utt_id;
  std::vector<int> labels;  // one id per frame, blanks allowed
};

struct FeatureMatrix {
  std::string utt_id;
  Matrix frames;           // T x D
  double frame_duration;   // seconds per frame
};

// Per-frame log-distributions over the acoustic vocabulary.
struct PosteriorMatrix {
  Matrix log_probs;  // T x |V|

  // Each row must log-sum-exp to 0 within tol.
  bool rows_normalized(double tol = 1e-8) const;
};

// CTC collapse: merge maximal runs of identical ids, then delete blanks.
// Throws InputError on ids outside [0, vocab_size).
std::vector<int> normalize_alignment(std::span<const int> labels, int vocab_size,
                                     int blank_id = 0);

// True iff normalize_alignment(labels) == transcript tokens.
bool validate_alignment(std::span<const int> labels, std::span<const int> transcript,
                        int vocab_size, int blank_id = 0);

struct EditCounts {
  int sub = 0;
  int del = 0;
  int ins = 0;
  int total() const { return sub + del + ins; }
  bool operator==(const EditCounts&) const = default;
};

// Minimal Levenshtein counts. Among minimal-edit alignments the one with the
// most matches is used, which makes the (S, D, I) split deterministic and
// symmetric (swapping ref/hyp keeps S and exchanges D with I).
EditCounts edit_distance(std::span<const int> ref, std::span<const int> hyp);

// --- dataset text formats -------------------------------------------------
// Transcript file: one line per utterance, `utt_id<TAB>tok tok tok`.
// Alignment file:  `utt_id<TAB>id id id` (integer ids, one per frame).

void write_transcripts(const std::filesystem::path& file,
                       std::span<const Transcript> transcripts, const Vocab& vocab);
std::vector<Transcript> read_transcripts(const std::filesystem::path& file,
                                         const Vocab& vocab);

void write_alignments(const std::filesystem::path& file,
                      std::span<const FrameAlignment> alignments);
std::vector<FrameAlignment> read_alignments(const std::filesystem::path& file,
                                            const Vocab& vocab);

}  // namespace sarstream::core
