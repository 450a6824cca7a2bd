// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// NEON variants (AArch64, 2 doubles per vector). Same reduction layout
// as the AVX2 path: independent lanes folded once at the end.

#include "kernels/ops_table.hpp"

#if defined(SARSTREAM_HAVE_NEON)

#include <arm_neon.h>

namespace sarstream::kernels::detail {
namespace {

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vy = vld1q_f64(y + i);
    vy = vaddq_f64(vy, vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(y + i, vy);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

double dot_neon(const double* x, const double* y, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vaddq_f64(acc, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  }
  double total = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) total += x[i] * y[i];
  return total;
}

void scale_neon(double a, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vmulq_f64(va, vld1q_f64(y + i)));
  for (; i < n; ++i) y[i] *= a;
}

void add_neon(const double* x, double* y, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
  for (; i < n; ++i) y[i] += x[i];
}

void scaled_sum_neon(double alpha, const double* x, double beta, const double* y,
                     double* out, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  const float64x2_t vb = vdupq_n_f64(beta);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t vx = vmulq_f64(va, vld1q_f64(x + i));
    float64x2_t vy = vmulq_f64(vb, vld1q_f64(y + i));
    vst1q_f64(out + i, vaddq_f64(vx, vy));
  }
  for (; i < n; ++i) out[i] = alpha * x[i] + beta * y[i];
}

void hadamard_neon(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(out + i, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

void hadamard_acc_neon(const double* x, const double* y, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t prod = vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(out + i), prod));
  }
  for (; i < n; ++i) out[i] += x[i] * y[i];
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) acc = vaddq_f64(acc, vld1q_f64(x + i));
  double total = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; i < n; ++i) total += x[i];
  return total;
}

double max_value_neon(const double* x, std::size_t n) {
  double m = x[0];
  std::size_t i = 0;
  if (n >= 2) {
    float64x2_t vm = vld1q_f64(x);
    for (i = 2; i + 2 <= n; i += 2) vm = vmaxq_f64(vm, vld1q_f64(x + i));
    m = vgetq_lane_f64(vm, 0);
    const double hi = vgetq_lane_f64(vm, 1);
    if (hi > m) m = hi;
  }
  for (; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

}  // namespace

const Ops& neon_ops() {
  static const Ops ops = {axpy_neon,     dot_neon,        scale_neon,
                          add_neon,      scaled_sum_neon, hadamard_neon,
                          hadamard_acc_neon, sum_neon,    max_value_neon};
  return ops;
}

}  // namespace sarstream::kernels::detail

#endif  // SARSTREAM_HAVE_NEON
