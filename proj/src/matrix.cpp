// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#include "sarstream/matrix.hpp"

#include <cmath>
#include <cstdlib>

#include "sarstream/kernels.hpp"

namespace sarstream {

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

void add_ab(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols())
    throw InputError("add_ab: shape mismatch");
  const int n = a.rows(), d = a.cols(), k = b.cols();
  for (int i = 0; i < n; ++i) {
    double* out_row = out.row(i);
    for (int j = 0; j < d; ++j) {
      kernels::axpy(a(i, j), b.row(j), out_row, static_cast<std::size_t>(k));
    }
  }
}

void add_abt(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols() || out.rows() != a.rows() || out.cols() != b.rows())
    throw InputError("add_abt: shape mismatch");
  const int n = a.rows(), m = b.rows();
  const auto d = static_cast<std::size_t>(a.cols());
  for (int i = 0; i < n; ++i) {
    const double* a_row = a.row(i);
    double* out_row = out.row(i);
    for (int j = 0; j < m; ++j) out_row[j] += kernels::dot(a_row, b.row(j), d);
  }
}

void add_atb(Matrix& out, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols())
    throw InputError("add_atb: shape mismatch");
  const int n = a.rows(), d = a.cols(), k = b.cols();
  for (int i = 0; i < n; ++i) {
    const double* b_row = b.row(i);
    for (int j = 0; j < d; ++j) {
      kernels::axpy(a(i, j), b_row, out.row(j), static_cast<std::size_t>(k));
    }
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  add_ab(out, a, b);
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.rows());
  add_abt(out, a, b);
  return out;
}

void add_into(Matrix& y, const Matrix& x) {
  if (!y.same_shape(x)) throw InputError("add_into: shape mismatch");
  kernels::add(x.data(), y.data(), x.size());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw InputError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.data()[i] - b.data()[i]);
    if (d > m) m = d;
  }
  return m;
}

}  // namespace sarstream
