// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels and the runtime backend dispatch.

#include "sarstream/kernels.hpp"

#include <cstdlib>
#include <string>

#include "kernels/ops_table.hpp"
#include "sarstream/error.hpp"

namespace sarstream::kernels {
namespace detail {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void scale_scalar(double a, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] *= a;
}

void add_scalar(const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

void scaled_sum_scalar(double alpha, const double* x, double beta, const double* y,
                       double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

void hadamard_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] * y[i];
}

void hadamard_acc_scalar(const double* x, const double* y, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] += x[i] * y[i];
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double max_value_scalar(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops ops = {axpy_scalar,     dot_scalar,          scale_scalar,
                          add_scalar,      scaled_sum_scalar,   hadamard_scalar,
                          hadamard_acc_scalar, sum_scalar,      max_value_scalar};
  return ops;
}

}  // namespace detail

namespace {

struct Active {
  const detail::Ops* ops;
  Backend backend;
};

Backend detect() {
  if (const char* env = std::getenv("SARSTREAM_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return Backend::scalar;
    if (want == "avx2" && available(Backend::avx2)) return Backend::avx2;
    if (want == "neon" && available(Backend::neon)) return Backend::neon;
    // Unknown or unavailable request falls through to autodetection.
  }
  if (available(Backend::avx2)) return Backend::avx2;
  if (available(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

const detail::Ops* ops_for(Backend b) {
  switch (b) {
    case Backend::scalar:
      return &detail::scalar_ops();
    case Backend::avx2:
#if defined(SARSTREAM_HAVE_AVX2)
      return &detail::avx2_ops();
#else
      return nullptr;
#endif
    case Backend::neon:
#if defined(SARSTREAM_HAVE_NEON)
      return &detail::neon_ops();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

Active& active_state() {
  static Active state = [] {
    const Backend b = detect();
    return Active{ops_for(b), b};
  }();
  return state;
}

}  // namespace

std::string_view name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

bool available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(SARSTREAM_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Backend::neon:
#if defined(SARSTREAM_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Backend active() { return active_state().backend; }

void force(Backend b) {
  if (!available(b)) throw InputError("kernel backend unavailable on this host");
  active_state() = Active{ops_for(b), b};
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  active_state().ops->axpy(a, x, y, n);
}
double dot(const double* x, const double* y, std::size_t n) {
  return active_state().ops->dot(x, y, n);
}
void scale(double a, double* y, std::size_t n) { active_state().ops->scale(a, y, n); }
void add(const double* x, double* y, std::size_t n) { active_state().ops->add(x, y, n); }
void scaled_sum(double alpha, const double* x, double beta, const double* y, double* out,
                std::size_t n) {
  active_state().ops->scaled_sum(alpha, x, beta, y, out, n);
}
void hadamard(const double* x, const double* y, double* out, std::size_t n) {
  active_state().ops->hadamard(x, y, out, n);
}
void hadamard_acc(const double* x, const double* y, double* out, std::size_t n) {
  active_state().ops->hadamard_acc(x, y, out, n);
}
double sum(const double* x, std::size_t n) { return active_state().ops->sum(x, n); }
double max_value(const double* x, std::size_t n) { return active_state().ops->max_value(x, n); }

}  // namespace sarstream::kernels
