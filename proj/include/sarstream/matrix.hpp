// Copyright (c) 2026 sarstream authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "sarstream/error.hpp"
#include "sarstream/rng.hpp"

namespace sarstream {

// Dense row-major double matrix. Vectors are 1 x n matrices.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw InputError("Matrix: negative dimension");
  }

  static Matrix zeros(int rows, int cols) { return Matrix(rows, cols); }
  static Matrix filled(int rows, int cols, double v) {
    Matrix m(rows, cols);
    for (auto& x : m.data_) x = v;
    return m;
  }
  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix gaussian(int rows, int cols, Rng& rng, double stddev) {
    Matrix m(rows, cols);
    for (auto& x : m.data_) x = rng.normal(0.0, stddev);
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * cols_ + j];
  }

  double* row(int i) { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  const double* row(int i) const { return data_.data() + static_cast<std::size_t>(i) * cols_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  void fill(double v) {
    for (auto& x : data_) x = v;
  }
  void zero() { fill(0.0); }

  bool all_finite() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// out += a * b
void add_ab(Matrix& out, const Matrix& a, const Matrix& b);
// out += a * b^T
void add_abt(Matrix& out, const Matrix& a, const Matrix& b);
// out += a^T * b
void add_atb(Matrix& out, const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// y += x, shape-checked
void add_into(Matrix& y, const Matrix& x);

double max_abs_diff(const Matrix& a, const Matrix& b);

}  // namespace sarstream
