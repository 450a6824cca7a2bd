// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// Equivalence tests between the scalar reference kernels and the SIMD
// variants selected at runtime. Elementwise kernels must match bit for bit
// (same per-element operation order); reductions may differ by
// reassociation rounding only.

#include <cmath>
#include <vector>

#include "doctest.h"
#include "sarstream/kernels.hpp"
#include "sarstream/rng.hpp"

using namespace sarstream;
namespace k = sarstream::kernels;

namespace {

struct BackendGuard {
  k::Backend saved;
  BackendGuard() : saved(k::active()) {}
  ~BackendGuard() { k::force(saved); }
};

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(0.0, scale);
  return v;
}

bool simd_backend_present() {
  return k::available(k::Backend::avx2) || k::available(k::Backend::neon);
}

k::Backend simd_backend() {
  return k::available(k::Backend::avx2) ? k::Backend::avx2 : k::Backend::neon;
}

}  // namespace

TEST_SUITE("kernels") {

TEST_CASE("scalar backend is always available") {
  CHECK(k::available(k::Backend::scalar));
  CHECK(k::name(k::active()) != "unknown");
}

TEST_CASE("elementwise kernels match the scalar reference exactly") {
  if (!simd_backend_present()) return;
  BackendGuard guard;
  Rng rng(11);
  // Sizes straddle the vector width to exercise the remainder loops.
  for (std::size_t n : {1u, 2u, 3u, 4u, 5u, 7u, 8u, 31u, 64u, 1001u}) {
    const auto x = random_vec(rng, n);
    const auto y0 = random_vec(rng, n);
    const double a = rng.normal(), b = rng.normal();

    auto run = [&](k::Backend backend) {
      k::force(backend);
      auto y = y0;
      std::vector<double> out(n), acc = y0;
      k::axpy(a, x.data(), y.data(), n);
      k::scale(b, y.data(), n);
      k::add(x.data(), y.data(), n);
      k::scaled_sum(a, x.data(), b, y0.data(), out.data(), n);
      k::hadamard(x.data(), y0.data(), acc.data(), n);
      k::hadamard_acc(x.data(), out.data(), acc.data(), n);
      return std::pair{y, acc};
    };

    const auto [y_s, acc_s] = run(k::Backend::scalar);
    const auto [y_v, acc_v] = run(simd_backend());
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(y_s[i] == y_v[i]);
      CHECK(acc_s[i] == acc_v[i]);
    }
  }
}

TEST_CASE("reductions agree within reassociation tolerance") {
  if (!simd_backend_present()) return;
  BackendGuard guard;
  Rng rng(12);
  for (std::size_t n : {1u, 3u, 4u, 6u, 17u, 256u, 4097u}) {
    const auto x = random_vec(rng, n);
    const auto y = random_vec(rng, n);

    k::force(k::Backend::scalar);
    const double dot_s = k::dot(x.data(), y.data(), n);
    const double sum_s = k::sum(x.data(), n);
    const double max_s = k::max_value(x.data(), n);

    k::force(simd_backend());
    const double dot_v = k::dot(x.data(), y.data(), n);
    const double sum_v = k::sum(x.data(), n);
    const double max_v = k::max_value(x.data(), n);

    const double dot_tol = 1e-12 * std::max(1.0, std::abs(dot_s)) * static_cast<double>(n);
    const double sum_tol = 1e-12 * std::max(1.0, std::abs(sum_s)) * static_cast<double>(n);
    CHECK(std::abs(dot_s - dot_v) <= dot_tol);
    CHECK(std::abs(sum_s - sum_v) <= sum_tol);
    CHECK(max_s == max_v);  // max is exact under any association
  }
}

TEST_CASE("force rejects unavailable backends") {
  BackendGuard guard;
  if (!k::available(k::Backend::neon)) {
    CHECK_THROWS_AS(k::force(k::Backend::neon), InputError);
  }
  if (!k::available(k::Backend::avx2)) {
    CHECK_THROWS_AS(k::force(k::Backend::avx2), InputError);
  }
}

TEST_CASE("dot against a long-double reference") {
  Rng rng(13);
  const std::size_t n = 513;
  const auto x = random_vec(rng, n);
  const auto y = random_vec(rng, n);
  long double ref = 0.0L;
  for (std::size_t i = 0; i < n; ++i) ref += static_cast<long double>(x[i]) * y[i];
  const double got = k::dot(x.data(), y.data(), n);
  CHECK(std::abs(static_cast<double>(ref) - got) <= 1e-11 * std::max(1.0, std::abs(got)));
}

}  // TEST_SUITE
