// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal reverse-mode autodiff over matrices, double precision. A Tape is
// built by evaluation (creation order is a valid topological order) and is
// single-threaded; separate tapes may run on separate threads. Parameters
// live in a ParamStore and receive gradients when Tape::backward flushes
// leaf gradients into them; repeated backward calls accumulate.

#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sarstream/error.hpp"
#include "sarstream/matrix.hpp"
#include "sarstream/rng.hpp"

namespace sarstream::grad {

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  // Adam state
  Matrix moment1;
  Matrix moment2;
};

class ParamStore {
 public:
  Param& create(const std::string& name, int rows, int cols, Rng& rng, double stddev);
  Param& create_zeros(const std::string& name, int rows, int cols);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Param*> all();
  std::vector<const Param*> all() const;
  std::size_t size() const { return params_.size(); }

  void zero_grad();
  // Copies values (not moments/grads) from a store with identical layout.
  void copy_values_from(const ParamStore& other);

  void save(const std::filesystem::path& file) const;
  void load(const std::filesystem::path& file);

 private:
  std::deque<Param> params_;  // stable addresses
  std::unordered_map<std::string, Param*> index_;
};

// Checkpoint format: magic "SARP", then per entry: u32 name length, name
// bytes, u32 rank, u32 dims, f64 little-endian values. Loading requires an
// exact one-to-one match with the given parameters.
void save_params(const std::filesystem::path& file, std::span<const Param* const> params);
void load_params(const std::filesystem::path& file, std::span<Param* const> params);

class Tape;

// Lightweight handle into a tape.
struct Node {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  int rows() const { return value().rows(); }
  int cols() const { return value().cols(); }
  double scalar() const;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves.
  Node constant(Matrix value);
  Node param(Param& p);

  // y = x w + 1 b    (x: n x d, w: d x k, b: 1 x k)
  Node affine(Node x, Node w, Node b);
  Node matmul(Node a, Node b);
  // a b^T
  Node matmul_nt(Node a, Node b);
  Node add(Node a, Node b);
  // alpha a + beta b (same shape)
  Node scaled_sum(double alpha, Node a, double beta, Node b);
  Node scale(Node a, double s);
  Node hadamard(Node a, Node b);
  Node tanh_op(Node x);
  Node relu_op(Node x);
  Node sigmoid_op(Node x);
  Node row_softmax(Node x);
  Node log_softmax(Node x);
  // Per-row normalization with learnable gain/bias (1 x d each).
  Node layer_norm(Node x, Node gain, Node bias, double eps = 1e-5);
  Node concat_rows(std::span<const Node> parts);
  Node concat_cols(std::span<const Node> parts);
  // Rows [r0, r1) of x.
  Node slice_rows(Node x, int r0, int r1);
  // Rows of `table` selected by ids (gradient scatters back).
  Node embed(Node table, std::span<const int> ids);
  // Mean negative log-softmax probability of targets; scalar.
  Node softmax_xent(Node logits, std::span<const int> targets);
  // Mean of -x[i, targets[i]] over rows (x already holds log-probs); scalar.
  Node pick_nll(Node x, std::span<const int> targets);
  // -log P(y | log_probs) summed over all CTC alignments; scalar with a
  // custom gradient computed by the forward-backward recursion.
  Node ctc_nll(Node log_probs, std::span<const int> y, int blank);
  Node sum_all(Node x);

  // Reverse sweep from a 1x1 loss node; flushes leaf grads into Params.
  void backward(Node loss);

  const Matrix& value(int id) const { return recs_[static_cast<std::size_t>(id)].value; }
  Matrix& grad(int id) { return recs_[static_cast<std::size_t>(id)].grad; }
  std::size_t size() const { return recs_.size(); }

 private:
  struct Rec {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;  // empty for leaves
    Param* origin = nullptr;
  };

  Node push(Matrix value, std::function<void(Tape&)> back, Param* origin = nullptr);

  std::deque<Rec> recs_;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParamStore& params);
  void step(std::span<Param* const> params);
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::int64_t t_ = 0;
};

struct FiniteDiffEntry {
  std::string name;
  double max_rel_err;
};

struct FiniteDiffReport {
  std::vector<FiniteDiffEntry> entries;
  double worst = 0.0;
  bool pass = true;
};

// Central-difference check of d(loss)/d(param) for every listed parameter.
// `build` must construct the loss node on the given tape deterministically;
// a non-deterministic build (two runs disagree) raises Error.
FiniteDiffReport finite_diff_check(const std::function<Node(Tape&)>& build,
                                   std::span<Param* const> params, double h = 1e-5,
                                   double tol = 1e-4);

}  // namespace sarstream::grad
