// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// The streaming semi-autoregressive model: an LM subnetwork turning the
// label history into a label-context embedding, a contextual block encoder
// carrying an acoustic context embedding across blocks, and linear output
// heads. The NAR baseline is the same encoder without the label slot.
//
// Context injection: the label and acoustic contexts occupy two extra
// attention slots prepended to the block's frame slots. The label slot is
// input-only; the acoustic slot is read out through a bounded projection to
// become the next block's context.

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sarstream/blocking.hpp"
#include "sarstream/core.hpp"
#include "sarstream/graph.hpp"

namespace sarstream::model {

struct ModelConfig {
  int feature_dim = 16;   // D
  int vocab_size = 21;    // |V|: blank + real tokens (bos excluded)
  int d_m = 32;           // encoder width; the context embeddings share it
  int d_lm = 32;          // LM hidden size
  int layers = 2;
  int heads = 2;
  int ff_mult = 2;
  bool label_context = true;      // false: NAR encoder (acoustic slot only)
  double interctc_weight = 0.3;

  void validate() const;
};

enum class LossMode { ce, ce_interctc, ctc };

LossMode parse_loss_mode(const std::string& name);

// Single-layer gated recurrent cell over BOS-prefixed token sequences.
// Strictly causal: the state after a prefix depends only on that prefix.
class LMSubnetwork {
 public:
  LMSubnetwork(const ModelConfig& cfg, grad::ParamStore& store, Rng& rng, int bos_id);

  // Label-context embedding (1 x d_m) for a normalized prefix (no blanks).
  // With frozen=true parameters enter the tape as constants.
  grad::Node context(grad::Tape& tape, std::span<const int> prefix, bool frozen) const;

  // Next-token logits, one row per position of [BOS, tokens...].
  grad::Node sequence_logits(grad::Tape& tape, std::span<const int> tokens,
                             bool frozen) const;

  // Corpus perplexity under the current parameters (no gradients).
  double perplexity(std::span<const core::Transcript> corpus) const;

  int bos_id() const { return bos_id_; }

 private:
  grad::Node hidden_states(grad::Tape& tape, std::span<const int> tokens, bool frozen) const;

  grad::ParamStore* store_;
  int d_lm_;
  int vocab_size_;
  int bos_id_;
};

// Contextual block encoder: self-attention plus feed-forward over one
// block's frame slots and its context slots. No access to other blocks.
class CBEncoder {
 public:
  CBEncoder(const ModelConfig& cfg, grad::ParamStore& store, Rng& rng);

  struct BlockOut {
    grad::Node frames;       // one row per input frame, d_m wide
    grad::Node frames_mid;   // same rows after the interCTC tap layer
    grad::Node context_out;  // 1 x d_m next acoustic context
  };

  // c_lm is absent for NAR encoders. Throws InputError on an empty block.
  BlockOut encode(grad::Tape& tape, const Matrix& frames,
                  const std::optional<grad::Node>& c_lm, grad::Node c_ac) const;

  grad::Node initial_context(grad::Tape& tape) const;

 private:
  grad::ParamStore* store_;
  ModelConfig cfg_;
  int d_head_;
  int mid_after_;  // interCTC tap sits after this many layers
};

struct ForwardOptions {
  bool need_intermediate = false;
  bool freeze_lm = false;
};

class SARModel {
 public:
  SARModel(const ModelConfig& cfg, std::uint64_t seed);
  SARModel(const SARModel&) = delete;
  SARModel& operator=(const SARModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  bool has_lm() const { return lm_.has_value(); }
  const LMSubnetwork& lm() const { return *lm_; }
  LMSubnetwork& lm() { return *lm_; }

  grad::ParamStore& lm_params() { return lm_params_; }
  grad::ParamStore& enc_params() { return enc_params_; }
  std::vector<grad::Param*> all_params();

  void save(const std::filesystem::path& file);
  void load(const std::filesystem::path& file);

  struct Forward {
    grad::Node log_probs;                    // T x |V|, rows log-sum-exp to 0
    std::optional<grad::Node> inter_log_probs;
  };

  // Teacher-forced pass: block b's label context comes from the ground-truth
  // alignment restricted to the frames already emitted (the central windows
  // of blocks before b); the acoustic context chains block to block. Output
  // rows are assembled from central windows only.
  Forward forward_teacher_forced(grad::Tape& tape, const Matrix& feats,
                                 std::span<const int> align,
                                 const blocking::BlockSpec& spec,
                                 const ForwardOptions& opts = {});

  core::PosteriorMatrix posteriors_teacher_forced(const Matrix& feats,
                                                  std::span<const int> align,
                                                  const blocking::BlockSpec& spec);

  // --- streaming inference ---
  struct StreamState {
    Matrix c_ac;  // 1 x d_m
  };
  StreamState initial_state() const;

  // Full-block log-probabilities for one block given the raw frame history
  // emitted by previous blocks (central windows only). Advances the state.
  Matrix step_block(const Matrix& block_frames, std::span<const int> a_hist,
                    StreamState& state);

  grad::Node out_logits(grad::Tape& tape, grad::Node h);
  grad::Node inter_logits(grad::Tape& tape, grad::Node h);
  const CBEncoder& encoder() const { return *enc_; }

 private:
  ModelConfig cfg_;
  grad::ParamStore lm_params_;
  grad::ParamStore enc_params_;
  std::optional<LMSubnetwork> lm_;
  std::optional<CBEncoder> enc_;
};

// Frame-CE / CTC losses on assembled posteriors, for evaluation and tests.
// CTC terms are normalized per frame so modes stay on comparable scales;
// with interCTC weight w: (1-w) * CE + w * ctc(inter, y)/T, and w = 0
// reproduces plain CE bit for bit.
double compute_loss(const core::PosteriorMatrix& post, std::span<const int> align,
                    std::span<const int> transcript, LossMode mode,
                    double interctc_weight = 0.3,
                    const core::PosteriorMatrix* inter = nullptr);

struct TrainItem {
  const Matrix* feats = nullptr;
  const std::vector<int>* align = nullptr;       // required for CE modes
  const std::vector<int>* transcript = nullptr;  // required for CTC / interCTC
};

struct TrainOptions {
  LossMode mode = LossMode::ce;
  double interctc_weight = 0.3;
  bool random_block = false;
  int block_lo = 35;
  int block_hi = 45;
  bool freeze_lm = false;
};

// One pass over the dataset, one optimizer step per utterance. Utterance
// order is shuffled with `rng`; random-block sampling draws from the same
// stream. Returns the mean loss. NaN/inf losses raise NumericalError.
double train_epoch(SARModel& model, std::span<const TrainItem> items,
                   const blocking::BlockSpec& spec, const TrainOptions& opts,
                   Rng& rng, grad::Adam& adam);

// Causal-LM pretraining on transcripts; one optimizer step per sequence.
// Returns per-epoch training perplexity (final <= initial on any corpus a
// desk-scale cell can fit).
std::vector<double> pretrain_lm(SARModel& model, std::span<const core::Transcript> corpus,
                                int epochs, std::uint64_t seed,
                                double lr = 1e-3);

}  // namespace sarstream::model
