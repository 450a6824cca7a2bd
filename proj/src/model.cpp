// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include "sarstream/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "sarstream/ctc.hpp"

namespace sarstream::model {

void ModelConfig::validate() const {
  if (feature_dim < 1 || vocab_size < 2 || d_m < 1 || d_lm < 1 || layers < 1 ||
      heads < 1 || ff_mult < 1)
    throw InputError("ModelConfig: dimensions must be positive");
  if (d_m % heads != 0) throw InputError("ModelConfig: heads must divide d_m");
  if (interctc_weight < 0.0 || interctc_weight > 1.0)
    throw InputError("ModelConfig: interctc_weight must be in [0, 1]");
}

LossMode parse_loss_mode(const std::string& name) {
  if (name == "ce") return LossMode::ce;
  if (name == "ce_interctc") return LossMode::ce_interctc;
  if (name == "ctc") return LossMode::ctc;
  throw ConfigError("unknown loss mode '" + name + "'");
}

namespace {

using grad::Node;
using grad::Param;
using grad::ParamStore;
using grad::Tape;

// Parameters enter the tape as constants when frozen (no gradient flow).
Node enter(Tape& tape, Param& p, bool frozen) {
  return frozen ? tape.constant(p.value) : tape.param(p);
}

double init_scale(int fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

Param& create_ln_gain(ParamStore& store, const std::string& name, int d) {
  Param& p = store.create_zeros(name, 1, d);
  p.value.fill(1.0);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// LMSubnetwork

LMSubnetwork::LMSubnetwork(const ModelConfig& cfg, ParamStore& store, Rng& rng, int bos_id)
    : store_(&store), d_lm_(cfg.d_lm), vocab_size_(cfg.vocab_size), bos_id_(bos_id) {
  const int d = cfg.d_lm;
  store.create("lm.embed", cfg.vocab_size + 1, d, rng, init_scale(d));
  for (const char* gate : {"z", "r", "h"}) {
    store.create(std::string("lm.gru.w") + gate, d, d, rng, init_scale(d));
    store.create(std::string("lm.gru.u") + gate, d, d, rng, init_scale(d));
    store.create_zeros(std::string("lm.gru.b") + gate, 1, d);
  }
  store.create("lm.proj.w", d, cfg.d_m, rng, init_scale(d));
  store.create_zeros("lm.proj.b", 1, cfg.d_m);
  store.create("lm.head.w", d, cfg.vocab_size, rng, init_scale(d));
  store.create_zeros("lm.head.b", 1, cfg.vocab_size);
}

Node LMSubnetwork::hidden_states(Tape& tape, std::span<const int> tokens, bool frozen) const {
  ParamStore& s = *store_;
  Node table = enter(tape, s.at("lm.embed"), frozen);
  Node wz = enter(tape, s.at("lm.gru.wz"), frozen), uz = enter(tape, s.at("lm.gru.uz"), frozen);
  Node wr = enter(tape, s.at("lm.gru.wr"), frozen), ur = enter(tape, s.at("lm.gru.ur"), frozen);
  Node wh = enter(tape, s.at("lm.gru.wh"), frozen), uh = enter(tape, s.at("lm.gru.uh"), frozen);
  Node bz = enter(tape, s.at("lm.gru.bz"), frozen);
  Node br = enter(tape, s.at("lm.gru.br"), frozen);
  Node bh = enter(tape, s.at("lm.gru.bh"), frozen);

  Node x_all = tape.embed(table, tokens);
  Node h = tape.constant(Matrix(1, d_lm_));
  std::vector<Node> states;
  states.reserve(tokens.size());
  for (int t = 0; t < static_cast<int>(tokens.size()); ++t) {
    Node x = tape.slice_rows(x_all, t, t + 1);
    Node z = tape.sigmoid_op(tape.add(tape.affine(x, wz, bz), tape.matmul(h, uz)));
    Node r = tape.sigmoid_op(tape.add(tape.affine(x, wr, br), tape.matmul(h, ur)));
    Node cand =
        tape.tanh_op(tape.add(tape.affine(x, wh, bh), tape.matmul(tape.hadamard(r, h), uh)));
    // h' = h + z .* (cand - h)
    h = tape.add(h, tape.hadamard(z, tape.scaled_sum(1.0, cand, -1.0, h)));
    states.push_back(h);
  }
  return tape.concat_rows(states);
}

Node LMSubnetwork::context(Tape& tape, std::span<const int> prefix, bool frozen) const {
  for (int tok : prefix) {
    if (tok <= 0 || tok >= vocab_size_)
      throw InputError("lm_context: prefix must hold real tokens only");
  }
  std::vector<int> input;
  input.reserve(prefix.size() + 1);
  input.push_back(bos_id_);
  input.insert(input.end(), prefix.begin(), prefix.end());

  Node states = hidden_states(tape, input, frozen);
  Node last = tape.slice_rows(states, states.rows() - 1, states.rows());
  return tape.tanh_op(
      tape.affine(last, enter(tape, store_->at("lm.proj.w"), frozen),
                  enter(tape, store_->at("lm.proj.b"), frozen)));
}

Node LMSubnetwork::sequence_logits(Tape& tape, std::span<const int> tokens,
                                   bool frozen) const {
  if (tokens.empty()) throw InputError("sequence_logits: empty sequence");
  std::vector<int> input;
  input.reserve(tokens.size());
  input.push_back(bos_id_);
  input.insert(input.end(), tokens.begin(), tokens.end() - 1);
  Node states = hidden_states(tape, input, frozen);
  return tape.affine(states, enter(tape, store_->at("lm.head.w"), frozen),
                     enter(tape, store_->at("lm.head.b"), frozen));
}

double LMSubnetwork::perplexity(std::span<const core::Transcript> corpus) const {
  double total_nll = 0.0;
  std::size_t total_tokens = 0;
  for (const auto& tr : corpus) {
    if (tr.tokens.empty()) continue;
    Tape tape;
    Node logits = sequence_logits(tape, tr.tokens, true);
    Node loss = tape.softmax_xent(logits, tr.tokens);
    total_nll += loss.scalar() * static_cast<double>(tr.tokens.size());
    total_tokens += tr.tokens.size();
  }
  if (total_tokens == 0) throw InputError("perplexity: empty corpus");
  return std::exp(total_nll / static_cast<double>(total_tokens));
}

// ---------------------------------------------------------------------------
// CBEncoder

CBEncoder::CBEncoder(const ModelConfig& cfg, ParamStore& store, Rng& rng)
    : store_(&store), cfg_(cfg), d_head_(cfg.d_m / cfg.heads),
      mid_after_(std::max(1, cfg.layers / 2)) {
  const int d = cfg.d_m;
  store.create("enc.in.w", cfg.feature_dim, d, rng, init_scale(cfg.feature_dim));
  store.create_zeros("enc.in.b", 1, d);
  store.create("enc.ctx0", 1, d, rng, 0.1);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "enc.l" + std::to_string(l) + ".";
    for (int h = 0; h < cfg.heads; ++h) {
      const std::string hp = p + "att.h" + std::to_string(h) + ".";
      store.create(hp + "wq", d, d_head_, rng, init_scale(d));
      store.create(hp + "wk", d, d_head_, rng, init_scale(d));
      store.create(hp + "wv", d, d_head_, rng, init_scale(d));
    }
    store.create(p + "att.wo", d, d, rng, init_scale(d));
    store.create_zeros(p + "att.bo", 1, d);
    create_ln_gain(store, p + "ln1.g", d);
    store.create_zeros(p + "ln1.b", 1, d);
    store.create(p + "ff.w1", d, d * cfg.ff_mult, rng, init_scale(d));
    store.create_zeros(p + "ff.b1", 1, d * cfg.ff_mult);
    store.create(p + "ff.w2", d * cfg.ff_mult, d, rng, init_scale(d * cfg.ff_mult));
    store.create_zeros(p + "ff.b2", 1, d);
    create_ln_gain(store, p + "ln2.g", d);
    store.create_zeros(p + "ln2.b", 1, d);
  }
  store.create("enc.ro.w", d, d, rng, init_scale(d));
  store.create_zeros("enc.ro.b", 1, d);
}

CBEncoder::BlockOut CBEncoder::encode(Tape& tape, const Matrix& frames,
                                      const std::optional<Node>& c_lm, Node c_ac) const {
  if (frames.rows() < 1) throw InputError("encode_block: empty block");
  if (frames.cols() != cfg_.feature_dim) throw InputError("encode_block: feature dim mismatch");
  if (cfg_.label_context != c_lm.has_value())
    throw InputError("encode_block: label-context slot mismatch");
  ParamStore& s = *store_;

  Node proj = tape.affine(tape.constant(frames), tape.param(s.at("enc.in.w")),
                          tape.param(s.at("enc.in.b")));
  std::vector<Node> parts;
  if (c_lm) parts.push_back(*c_lm);
  parts.push_back(c_ac);
  parts.push_back(proj);
  Node x = tape.concat_rows(parts);

  const int ctx_slots = cfg_.label_context ? 2 : 1;
  const double att_scale = 1.0 / std::sqrt(static_cast<double>(d_head_));
  Node mid = x;
  for (int l = 0; l < cfg_.layers; ++l) {
    const std::string p = "enc.l" + std::to_string(l) + ".";
    std::vector<Node> head_ctx;
    head_ctx.reserve(static_cast<std::size_t>(cfg_.heads));
    for (int h = 0; h < cfg_.heads; ++h) {
      const std::string hp = p + "att.h" + std::to_string(h) + ".";
      Node q = tape.matmul(x, tape.param(s.at(hp + "wq")));
      Node k = tape.matmul(x, tape.param(s.at(hp + "wk")));
      Node v = tape.matmul(x, tape.param(s.at(hp + "wv")));
      Node att = tape.row_softmax(tape.scale(tape.matmul_nt(q, k), att_scale));
      head_ctx.push_back(tape.matmul(att, v));
    }
    Node mixed = tape.affine(tape.concat_cols(head_ctx), tape.param(s.at(p + "att.wo")),
                             tape.param(s.at(p + "att.bo")));
    x = tape.layer_norm(tape.add(x, mixed), tape.param(s.at(p + "ln1.g")),
                        tape.param(s.at(p + "ln1.b")));
    Node ff = tape.affine(
        tape.tanh_op(tape.affine(x, tape.param(s.at(p + "ff.w1")), tape.param(s.at(p + "ff.b1")))),
        tape.param(s.at(p + "ff.w2")), tape.param(s.at(p + "ff.b2")));
    x = tape.layer_norm(tape.add(x, ff), tape.param(s.at(p + "ln2.g")),
                        tape.param(s.at(p + "ln2.b")));
    if (l + 1 == mid_after_) mid = x;
  }

  const int total_rows = ctx_slots + frames.rows();
  BlockOut out;
  out.frames = tape.slice_rows(x, ctx_slots, total_rows);
  out.frames_mid = tape.slice_rows(mid, ctx_slots, total_rows);
  const int ac_row = ctx_slots - 1;
  Node ac = tape.slice_rows(x, ac_row, ac_row + 1);
  // Bounded read-out keeps the chained context stable over long utterances.
  out.context_out = tape.tanh_op(
      tape.affine(ac, tape.param(s.at("enc.ro.w")), tape.param(s.at("enc.ro.b"))));
  return out;
}

Node CBEncoder::initial_context(Tape& tape) const {
  return tape.param(store_->at("enc.ctx0"));
}

// ---------------------------------------------------------------------------
// SARModel

SARModel::SARModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  if (cfg_.label_context) {
    Rng lm_rng = Rng::split(seed, "lm-init");
    lm_.emplace(cfg_, lm_params_, lm_rng, cfg_.vocab_size);  // bos = |V| slot
  }
  Rng enc_rng = Rng::split(seed, "enc-init");
  enc_.emplace(cfg_, enc_params_, enc_rng);
  enc_params_.create("out.w", cfg_.d_m, cfg_.vocab_size, enc_rng, init_scale(cfg_.d_m));
  enc_params_.create_zeros("out.b", 1, cfg_.vocab_size);
  enc_params_.create("inter.w", cfg_.d_m, cfg_.vocab_size, enc_rng, init_scale(cfg_.d_m));
  enc_params_.create_zeros("inter.b", 1, cfg_.vocab_size);
}

std::vector<Param*> SARModel::all_params() {
  std::vector<Param*> out = lm_params_.all();
  for (Param* p : enc_params_.all()) out.push_back(p);
  return out;
}

void SARModel::save(const std::filesystem::path& file) {
  const auto params = all_params();
  grad::save_params(file, std::vector<const Param*>(params.begin(), params.end()));
}

void SARModel::load(const std::filesystem::path& file) {
  const auto params = all_params();
  grad::load_params(file, params);
}

Node SARModel::out_logits(Tape& tape, Node h) {
  return tape.affine(h, tape.param(enc_params_.at("out.w")),
                     tape.param(enc_params_.at("out.b")));
}

Node SARModel::inter_logits(Tape& tape, Node h) {
  return tape.affine(h, tape.param(enc_params_.at("inter.w")),
                     tape.param(enc_params_.at("inter.b")));
}

SARModel::Forward SARModel::forward_teacher_forced(Tape& tape, const Matrix& feats,
                                                   std::span<const int> align,
                                                   const blocking::BlockSpec& spec,
                                                   const ForwardOptions& opts) {
  const int t_total = feats.rows();
  if (has_lm() && static_cast<int>(align.size()) != t_total)
    throw InputError("forward_teacher_forced: alignment length mismatch");

  const auto blocks = blocking::make_blocks(t_total, spec);
  Node c_ac = enc_->initial_context(tape);
  std::vector<Node> centrals, centrals_mid;
  centrals.reserve(blocks.size());
  int prev_win_end = 0;
  for (const auto& blk : blocks) {
    std::optional<Node> c_lm;
    if (has_lm()) {
      // Label context covers exactly the frames already emitted: the central
      // windows of earlier blocks, i.e. align[0 .. I_{b-1} + n_l).
      const auto prefix = core::normalize_alignment(align.first(static_cast<std::size_t>(prev_win_end)),
                                                    cfg_.vocab_size);
      c_lm = lm_->context(tape, prefix, opts.freeze_lm);
    }
    Matrix frames(blk.frames(), feats.cols());
    for (int i = 0; i < blk.frames(); ++i)
      std::memcpy(frames.row(i), feats.row(blk.begin + i),
                  sizeof(double) * static_cast<std::size_t>(feats.cols()));
    auto block_out = enc_->encode(tape, frames, c_lm, c_ac);
    const int rel0 = blk.win_begin - blk.begin;
    const int rel1 = blk.win_end - blk.begin;
    centrals.push_back(tape.slice_rows(block_out.frames, rel0, rel1));
    if (opts.need_intermediate)
      centrals_mid.push_back(tape.slice_rows(block_out.frames_mid, rel0, rel1));
    c_ac = block_out.context_out;
    prev_win_end = blk.win_end;
  }

  Forward fwd{tape.log_softmax(out_logits(tape, tape.concat_rows(centrals))), std::nullopt};
  if (opts.need_intermediate)
    fwd.inter_log_probs = tape.log_softmax(inter_logits(tape, tape.concat_rows(centrals_mid)));
  return fwd;
}

core::PosteriorMatrix SARModel::posteriors_teacher_forced(const Matrix& feats,
                                                          std::span<const int> align,
                                                          const blocking::BlockSpec& spec) {
  Tape tape;
  auto fwd = forward_teacher_forced(tape, feats, align, spec);
  return core::PosteriorMatrix{fwd.log_probs.value()};
}

SARModel::StreamState SARModel::initial_state() const {
  return StreamState{enc_params_.at("enc.ctx0").value};
}

Matrix SARModel::step_block(const Matrix& block_frames, std::span<const int> a_hist,
                            StreamState& state) {
  Tape tape;
  std::optional<Node> c_lm;
  if (has_lm()) {
    const auto prefix = core::normalize_alignment(a_hist, cfg_.vocab_size);
    c_lm = lm_->context(tape, prefix, true);
  }
  Node c_ac = tape.constant(state.c_ac);
  auto out = enc_->encode(tape, block_frames, c_lm, c_ac);
  Node lp = tape.log_softmax(out_logits(tape, out.frames));
  state.c_ac = out.context_out.value();
  return lp.value();
}

// ---------------------------------------------------------------------------
// Losses and training

double compute_loss(const core::PosteriorMatrix& post, std::span<const int> align,
                    std::span<const int> transcript, LossMode mode, double interctc_weight,
                    const core::PosteriorMatrix* inter) {
  const int t_total = post.log_probs.rows();
  switch (mode) {
    case LossMode::ce:
    case LossMode::ce_interctc: {
      if (static_cast<int>(align.size()) != t_total)
        throw InputError("compute_loss: alignment length mismatch");
      double ce = 0.0;
      for (int t = 0; t < t_total; ++t) {
        const int tgt = align[static_cast<std::size_t>(t)];
        if (tgt < 0 || tgt >= post.log_probs.cols())
          throw InputError("compute_loss: alignment label out of range");
        ce -= post.log_probs(t, tgt);
      }
      ce /= t_total;
      if (mode == LossMode::ce || interctc_weight == 0.0) return ce;
      if (inter == nullptr)
        throw InputError("compute_loss: interCTC mode needs intermediate posteriors");
      const double inter_term =
          ctc::ctc_loss(inter->log_probs, transcript) / static_cast<double>(t_total);
      return (1.0 - interctc_weight) * ce + interctc_weight * inter_term;
    }
    case LossMode::ctc:
      return ctc::ctc_loss(post.log_probs, transcript) / static_cast<double>(t_total);
  }
  throw InputError("compute_loss: unknown mode");
}

double train_epoch(SARModel& model, std::span<const TrainItem> items,
                   const blocking::BlockSpec& spec, const TrainOptions& opts, Rng& rng,
                   grad::Adam& adam) {
  if (items.empty()) throw InputError("train_epoch: empty dataset");
  const bool needs_align = opts.mode != LossMode::ctc;
  const bool needs_transcript = opts.mode != LossMode::ce;

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);

  std::vector<Param*> trainable;
  if (opts.freeze_lm) {
    trainable = model.enc_params().all();
  } else {
    trainable = model.all_params();
  }

  double total = 0.0;
  for (std::size_t idx : order) {
    const TrainItem& item = items[idx];
    if (item.feats == nullptr) throw InputError("train_epoch: missing features");
    if (needs_align && (item.align == nullptr ||
                        static_cast<int>(item.align->size()) != item.feats->rows()))
      throw InputError("train_epoch: missing alignment for CE-mode training");
    if (needs_transcript && item.transcript == nullptr)
      throw InputError("train_epoch: missing transcript for CTC-mode training");

    const blocking::BlockSpec utt_spec =
        opts.random_block ? blocking::sample_block_size(rng, opts.block_lo, opts.block_hi, spec)
                          : spec;

    static const std::vector<int> kNoAlign;
    const std::vector<int>& align = item.align ? *item.align : kNoAlign;
    const int t_total = item.feats->rows();

    Tape tape;
    ForwardOptions fopts;
    fopts.freeze_lm = opts.freeze_lm;
    fopts.need_intermediate = opts.mode == LossMode::ce_interctc && opts.interctc_weight > 0.0;
    auto fwd = model.forward_teacher_forced(tape, *item.feats, align, utt_spec, fopts);

    Node loss{nullptr, -1};
    switch (opts.mode) {
      case LossMode::ce:
        loss = tape.pick_nll(fwd.log_probs, align);
        break;
      case LossMode::ce_interctc: {
        Node ce = tape.pick_nll(fwd.log_probs, align);
        if (opts.interctc_weight == 0.0) {
          loss = ce;
        } else {
          Node inter = tape.ctc_nll(*fwd.inter_log_probs, *item.transcript, 0);
          loss = tape.scaled_sum(1.0 - opts.interctc_weight, ce,
                                 opts.interctc_weight / static_cast<double>(t_total), inter);
        }
        break;
      }
      case LossMode::ctc: {
        Node nll = tape.ctc_nll(fwd.log_probs, *item.transcript, 0);
        loss = tape.scale(nll, 1.0 / static_cast<double>(t_total));
        break;
      }
    }

    const double value = loss.scalar();
    if (!std::isfinite(value)) throw NumericalError("train_epoch: non-finite loss");
    total += value;

    model.lm_params().zero_grad();
    model.enc_params().zero_grad();
    tape.backward(loss);
    adam.step(trainable);
  }
  return total / static_cast<double>(items.size());
}

std::vector<double> pretrain_lm(SARModel& model, std::span<const core::Transcript> corpus,
                                int epochs, std::uint64_t seed, double lr) {
  if (!model.has_lm()) throw InputError("pretrain_lm: model has no LM subnetwork");
  std::vector<const core::Transcript*> seqs;
  for (const auto& tr : corpus)
    if (!tr.tokens.empty()) seqs.push_back(&tr);
  if (seqs.empty()) throw InputError("pretrain_lm: empty corpus");

  Rng rng = Rng::split(seed, "lm-pretrain");
  grad::Adam adam(grad::AdamConfig{.lr = lr});
  const auto trainable = model.lm_params().all();

  std::vector<double> history;
  history.reserve(static_cast<std::size_t>(epochs));
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> order(seqs.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);

    double nll = 0.0;
    std::size_t tokens = 0;
    for (std::size_t idx : order) {
      const auto& y = seqs[idx]->tokens;
      Tape tape;
      Node logits = model.lm().sequence_logits(tape, y, false);
      Node loss = tape.softmax_xent(logits, y);
      const double value = loss.scalar();
      if (!std::isfinite(value)) throw NumericalError("pretrain_lm: non-finite loss");
      nll += value * static_cast<double>(y.size());
      tokens += y.size();
      model.lm_params().zero_grad();
      tape.backward(loss);
      adam.step(trainable);
    }
    history.push_back(std::exp(nll / static_cast<double>(tokens)));
  }
  return history;
}

}  // namespace sarstream::model
