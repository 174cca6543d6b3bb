#pragma once

#include <cmath>
#include <initializer_list>
#include <string>
#include <vector>

#include "b2dcnn/common.hpp"
#include "b2dcnn/rng.hpp"

namespace b2dcnn {

// Dense row-major matrix of 64-bit reals: the carrier for embeddings,
// hidden-state sequences, feature maps, and all weight tensors. Plain value
// type; no operation in this toolkit mutates its inputs.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : rows_(rows), cols_(cols), values_(check_dims(rows, cols), 0.0) {}
  Matrix(int rows, int cols, double fill)
      : rows_(rows), cols_(cols), values_(check_dims(rows, cols), fill) {}

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  double& operator()(int r, int c) { return values_[static_cast<std::size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const {
    return values_[static_cast<std::size_t>(r) * cols_ + c];
  }

  double* row_data(int r) { return values_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row_data(int r) const {
    return values_.data() + static_cast<std::size_t>(r) * cols_;
  }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const { return std::to_string(rows_) + "x" + std::to_string(cols_); }

  Vec row_vec(int r) const { return Vec(row_data(r), row_data(r) + cols_); }
  void set_row(int r, const Vec& v);
  void fill(double v) { values_.assign(values_.size(), v); }

 private:
  static std::size_t check_dims(int rows, int cols);

  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
};

enum class Unary { Sigmoid, Tanh };

// Numerically stable logistic sigmoid; never overflows for finite input.
inline double sigmoid(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix matmul(const Matrix& a, const Matrix& b);
Vec matvec(const Matrix& a, const Vec& x);
// Returns aᵀx without forming the transpose.
Vec matvec_transpose(const Matrix& a, const Vec& x);

Matrix apply_unary(Unary f, const Matrix& a);

// Entries i.i.d. uniform on [lo, hi], drawn row-major. lo must be < hi.
Matrix uniform_init(int rows, int cols, double lo, double hi, RandomSource& rng);

Matrix reverse_rows(const Matrix& a);
void add_in_place(Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);

}  // namespace b2dcnn
