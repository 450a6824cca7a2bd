// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0
//
// Double-precision kernels behind the arithmetic-heavy inner loops.
// A scalar reference implementation always exists; on x86-64 an AVX2
// variant and on AArch64 a NEON variant are selected at runtime.
// SARSTREAM_KERNELS=scalar|avx2|neon overrides the selection.

#pragma once

#include <cstddef>
#include <string_view>

namespace sarstream::kernels {

enum class Backend { scalar, avx2, neon };

std::string_view name(Backend b);
bool available(Backend b);
Backend active();
// Test hook; throws InputError if the backend is unavailable on this host.
void force(Backend b);

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);
// sum_i x[i] * y[i]
double dot(const double* x, const double* y, std::size_t n);
// y *= a
void scale(double a, double* y, std::size_t n);
// y += x
void add(const double* x, double* y, std::size_t n);
// out = alpha * x + beta * y
void scaled_sum(double alpha, const double* x, double beta, const double* y,
                double* out, std::size_t n);
// out = x .* y
void hadamard(const double* x, const double* y, double* out, std::size_t n);
// out += x .* y
void hadamard_acc(const double* x, const double* y, double* out, std::size_t n);
double sum(const double* x, std::size_t n);
double max_value(const double* x, std::size_t n);

}  // namespace sarstream::kernels
