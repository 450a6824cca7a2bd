// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// Internal dispatch table shared by the kernel backends.

#pragma once

#include <cstddef>

namespace sarstream::kernels::detail {

struct Ops {
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  void (*add)(const double*, double*, std::size_t);
  void (*scaled_sum)(double, const double*, double, const double*, double*, std::size_t);
  void (*hadamard)(const double*, const double*, double*, std::size_t);
  void (*hadamard_acc)(const double*, const double*, double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*max_value)(const double*, std::size_t);
};

const Ops& scalar_ops();

#if defined(SARSTREAM_HAVE_AVX2)
const Ops& avx2_ops();
#endif
#if defined(SARSTREAM_HAVE_NEON)
const Ops& neon_ops();
#endif

}  // namespace sarstream::kernels::detail
