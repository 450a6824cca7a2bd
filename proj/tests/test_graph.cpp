// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "sarstream/graph.hpp"

using namespace sarstream;
using namespace sarstream::grad;

namespace {

Matrix from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("affine identity and bias") {
  ParamStore store;
  Rng rng(1);
  Param& w = store.create("w", 2, 2, rng, 0.0);
  w.value = Matrix::identity(2);
  Param& b = store.create_zeros("b", 1, 2);

  Tape tape;
  Node x = tape.constant(Matrix::identity(2));
  Node y = tape.affine(x, tape.param(w), tape.param(b));
  CHECK(y.value()(0, 0) == 1.0);
  CHECK(y.value()(0, 1) == 0.0);
  CHECK(y.value()(1, 1) == 1.0);

  Tape t2;
  Node x2 = t2.constant(from_rows({{1, 2}}));
  ParamStore s2;
  Param& w2 = s2.create_zeros("w", 2, 1);
  w2.value(0, 0) = 1.0;
  w2.value(1, 0) = 1.0;
  Param& b2 = s2.create_zeros("b", 1, 1);
  b2.value(0, 0) = 3.0;
  Node y2 = t2.affine(x2, t2.param(w2), t2.param(b2));
  CHECK(y2.value()(0, 0) == 6.0);
}

TEST_CASE("affine rejects shape mismatches") {
  ParamStore store;
  Param& w = store.create_zeros("w", 3, 2);
  Param& b = store.create_zeros("b", 1, 2);
  Tape tape;
  Node x = tape.constant(Matrix(2, 2));  // inner dim 2 != 3
  CHECK_THROWS_AS(tape.affine(x, tape.param(w), tape.param(b)), InputError);
}

TEST_CASE("affine gradient matches finite differences") {
  ParamStore store;
  Rng rng(2);
  Param& w = store.create("w", 4, 2, rng, 0.5);
  Param& b = store.create("b", 1, 2, rng, 0.5);
  const Matrix x = Matrix::gaussian(3, 4, rng, 1.0);
  const Matrix target = Matrix::gaussian(3, 2, rng, 1.0);

  auto build = [&](Tape& t) {
    Node y = t.affine(t.constant(x), t.param(w), t.param(b));
    Node diff = t.scaled_sum(1.0, y, -1.0, t.constant(target));
    return t.sum_all(t.hadamard(diff, diff));
  };
  std::vector<Param*> params = {&w, &b};
  const auto report = finite_diff_check(build, params, 1e-5, 1e-6);
  CHECK(report.pass);
  CHECK(report.worst < 1e-6);
}

TEST_CASE("softmax_xent on uniform logits equals ln k") {
  Tape tape;
  Node logits = tape.constant(Matrix(3, 4));
  const std::vector<int> targets = {0, 2, 3};
  Node loss = tape.softmax_xent(logits, targets);
  CHECK(loss.scalar() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("softmax_xent saturates to zero on a dominant logit") {
  Tape tape;
  Matrix m(1, 4);
  m(0, 2) = 1e6;
  Node loss = tape.softmax_xent(tape.constant(m), std::vector{2});
  CHECK(loss.scalar() < 1e-12);
}

TEST_CASE("softmax_xent gradient matches finite differences") {
  ParamStore store;
  Rng rng(3);
  Param& logits = store.create("logits", 5, 6, rng, 1.0);
  const std::vector<int> targets = {1, 0, 5, 2, 2};
  auto build = [&](Tape& t) { return t.softmax_xent(t.param(logits), targets); };
  std::vector<Param*> params = {&logits};
  CHECK(finite_diff_check(build, params, 1e-5, 1e-6).pass);
}

TEST_CASE("backward of sum gives ones; disconnected parameters stay zero") {
  ParamStore store;
  Rng rng(4);
  Param& w = store.create("w", 2, 2, rng, 1.0);
  Param& unused = store.create("unused", 3, 1, rng, 1.0);
  store.zero_grad();
  Tape tape;
  Node loss = tape.sum_all(tape.param(w));
  tape.backward(loss);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) CHECK(w.grad(i, j) == 1.0);
  for (int i = 0; i < 3; ++i) CHECK(unused.grad(i, 0) == 0.0);

  // Without zeroing, a second backward accumulates.
  Tape tape2;
  tape2.backward(tape2.sum_all(tape2.param(w)));
  CHECK(w.grad(0, 0) == 2.0);
}

TEST_CASE("backward rejects non-scalar roots") {
  ParamStore store;
  Param& w = store.create_zeros("w", 2, 2);
  Tape tape;
  Node n = tape.param(w);
  CHECK_THROWS_AS(tape.backward(n), InputError);
}

TEST_CASE("chained affine+tanh+xent matches finite differences") {
  ParamStore store;
  Rng rng(5);
  Param& w1 = store.create("w1", 4, 8, rng, 0.5);
  Param& b1 = store.create("b1", 1, 8, rng, 0.1);
  Param& w2 = store.create("w2", 8, 3, rng, 0.5);
  Param& b2 = store.create("b2", 1, 3, rng, 0.1);
  const Matrix x = Matrix::gaussian(6, 4, rng, 1.0);
  const std::vector<int> targets = {0, 1, 2, 0, 1, 2};

  auto build = [&](Tape& t) {
    Node h = t.tanh_op(t.affine(t.constant(x), t.param(w1), t.param(b1)));
    Node logits = t.affine(h, t.param(w2), t.param(b2));
    return t.softmax_xent(logits, targets);
  };
  auto params = store.all();
  const auto report = finite_diff_check(build, params, 1e-5, 1e-6);
  CHECK(report.pass);
}

TEST_CASE("every structural op passes a finite-difference check") {
  ParamStore store;
  Rng rng(6);
  Param& a = store.create("a", 3, 4, rng, 0.7);
  Param& b = store.create("b", 5, 4, rng, 0.7);
  Param& table = store.create("table", 7, 4, rng, 0.7);
  Param& gain = store.create("gain", 1, 4, rng, 0.3);
  Param& bias = store.create("bias", 1, 4, rng, 0.3);
  const std::vector<int> ids = {0, 6, 3, 3};
  const std::vector<int> targets = {1, 0, 4, 2, 3, 1, 0, 2, 4, 0, 1, 2};

  auto build = [&](Tape& t) {
    Node na = t.param(a);
    Node nb = t.param(b);
    Node scores = t.matmul_nt(na, nb);                   // 3x5
    Node att = t.row_softmax(scores);                    // 3x5
    Node mixed = t.matmul(att, nb);                      // 3x4
    Node emb = t.embed(t.param(table), ids);             // 4x4
    std::vector<Node> parts = {mixed, emb, na};
    Node stack = t.concat_rows(parts);                   // 10x4
    Node normed = t.layer_norm(stack, t.param(gain), t.param(bias));
    Node gated = t.hadamard(t.sigmoid_op(normed), t.tanh_op(normed));
    std::vector<Node> wide_parts = {gated, t.relu_op(stack)};
    Node wide = t.concat_cols(wide_parts);               // 10x8
    Node sliced = t.slice_rows(wide, 1, 7);              // 6x8
    Node lsm = t.log_softmax(sliced);                    // 6x8
    std::vector<Node> two = {sliced, lsm};
    Node big = t.concat_rows(two);                       // 12x8
    return t.softmax_xent(big, targets);
  };
  auto params = store.all();
  const auto report = finite_diff_check(build, params, 1e-5, 2e-6);
  CHECK(report.pass);
}

TEST_CASE("finite_diff_check on a linear model is near machine precision") {
  ParamStore store;
  Rng rng(7);
  Param& w = store.create("w", 3, 3, rng, 1.0);
  const Matrix x = Matrix::gaussian(2, 3, rng, 1.0);
  auto build = [&](Tape& t) { return t.sum_all(t.matmul(t.constant(x), t.param(w))); };
  std::vector<Param*> params = {&w};
  const auto report = finite_diff_check(build, params, 1e-5, 1e-4);
  CHECK(report.pass);
  CHECK(report.worst < 1e-9);
}

TEST_CASE("finite_diff_check with no parameters passes vacuously") {
  auto build = [](Tape& t) { return t.constant(Matrix::filled(1, 1, 2.0)); };
  const auto report = finite_diff_check(build, {}, 1e-5, 1e-4);
  CHECK(report.pass);
  CHECK(report.entries.empty());
}

TEST_CASE("adam reduces a quadratic") {
  ParamStore store;
  Rng rng(8);
  Param& w = store.create("w", 1, 4, rng, 2.0);
  Adam adam(AdamConfig{.lr = 5e-2});
  double first = 0.0, last = 0.0;
  for (int step = 0; step < 200; ++step) {
    store.zero_grad();
    Tape t;
    Node n = t.param(w);
    Node loss = t.sum_all(t.hadamard(n, n));
    if (step == 0) first = loss.scalar();
    last = loss.scalar();
    t.backward(loss);
    adam.step(store);
  }
  CHECK(last < first * 1e-2);
}

TEST_CASE("checkpoint round-trips and flags corruption") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "sarstream_ckpt";
  fs::create_directories(dir);
  const auto file = dir / "model.ckpt";

  ParamStore store;
  Rng rng(9);
  store.create("enc.w", 4, 3, rng, 1.0);
  store.create("enc.b", 1, 3, rng, 1.0);
  store.save(file);

  ParamStore loaded;
  Rng rng2(10);
  loaded.create("enc.w", 4, 3, rng2, 1.0);
  loaded.create("enc.b", 1, 3, rng2, 1.0);
  loaded.load(file);
  CHECK(max_abs_diff(loaded.at("enc.w").value, store.at("enc.w").value) == 0.0);
  CHECK(max_abs_diff(loaded.at("enc.b").value, store.at("enc.b").value) == 0.0);

  // Truncate: the error must carry a byte offset.
  {
    std::ifstream in(file, std::ios::binary);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
    bytes.resize(bytes.size() - 7);
    std::ofstream out(file, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  try {
    loaded.load(file);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }

  // Bad magic.
  {
    std::ofstream out(file, std::ios::binary);
    out.write("NOPE", 4);
  }
  CHECK_THROWS_AS(loaded.load(file), FormatError);
  CHECK_THROWS_AS(loaded.load(dir / "absent.ckpt"), MissingArtifactError);
  fs::remove_all(dir);
}

TEST_CASE("shape mismatch on load is rejected") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "sarstream_ckpt2";
  fs::create_directories(dir);
  const auto file = dir / "model.ckpt";
  ParamStore store;
  Rng rng(11);
  store.create("w", 2, 2, rng, 1.0);
  store.save(file);

  ParamStore other;
  Rng rng2(12);
  other.create("w", 2, 3, rng2, 1.0);
  CHECK_THROWS_AS(other.load(file), FormatError);
  fs::remove_all(dir);
}

}  // TEST_SUITE
