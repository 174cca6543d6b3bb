#include "b2dcnn/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace b2dcnn {

std::size_t Matrix::check_dims(int rows, int cols) {
  if (rows <= 0 || cols <= 0) {
    throw ShapeError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int r = static_cast<int>(rows.size());
  const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
  Matrix m(r, c);
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != c) {
      throw ShapeError("from_rows: ragged initializer");
    }
    std::copy(row.begin(), row.end(), m.row_data(i));
    ++i;
  }
  return m;
}

void Matrix::set_row(int r, const Vec& v) {
  if (static_cast<int>(v.size()) != cols_) {
    throw ShapeError("set_row: vector length " + std::to_string(v.size()) +
                     " does not match row width " + std::to_string(cols_));
  }
  std::copy(v.begin(), v.end(), row_data(r));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions disagree: " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  const int m = a.rows();
  const int kk = a.cols();
  const int n = b.cols();
  // Row-parallel: each output row is produced by one thread with the same
  // k-ascending accumulation order as the serial run, so results are
  // identical at any thread count.
  const bool big = static_cast<long long>(m) * kk * n >= (1LL << 18);
#pragma omp parallel for schedule(static) if (big)
  for (int i = 0; i < m; ++i) {
    double* dst = out.row_data(i);
    const double* arow = a.row_data(i);
    for (int k = 0; k < kk; ++k) {
      const double aik = arow[k];
      const double* brow = b.row_data(k);
      for (int j = 0; j < n; ++j) {
        dst[j] += aik * brow[j];
      }
    }
  }
  return out;
}

Vec matvec(const Matrix& a, const Vec& x) {
  if (a.cols() != static_cast<int>(x.size())) {
    throw ShapeError("matvec: " + a.shape_str() + " vs vector of length " +
                     std::to_string(x.size()));
  }
  Vec out(static_cast<std::size_t>(a.rows()), 0.0);
  const int m = a.rows();
  const int n = a.cols();
  const bool big = static_cast<long long>(m) * n >= (1LL << 20);
#pragma omp parallel for schedule(static) if (big)
  for (int i = 0; i < m; ++i) {
    const double* row = a.row_data(i);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      sum += row[j] * x[j];
    }
    out[i] = sum;
  }
  return out;
}

Vec matvec_transpose(const Matrix& a, const Vec& x) {
  if (a.rows() != static_cast<int>(x.size())) {
    throw ShapeError("matvec_transpose: " + a.shape_str() + " vs vector of length " +
                     std::to_string(x.size()));
  }
  Vec out(static_cast<std::size_t>(a.cols()), 0.0);
  for (int i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    const double* row = a.row_data(i);
    for (int j = 0; j < a.cols(); ++j) {
      out[j] += xi * row[j];
    }
  }
  return out;
}

Matrix apply_unary(Unary f, const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  const std::size_t n = a.size();
  const double* src = a.data();
  double* dst = out.data();
  switch (f) {
    case Unary::Sigmoid:
      for (std::size_t i = 0; i < n; ++i) dst[i] = sigmoid(src[i]);
      break;
    case Unary::Tanh:
      for (std::size_t i = 0; i < n; ++i) dst[i] = std::tanh(src[i]);
      break;
  }
  return out;
}

Matrix uniform_init(int rows, int cols, double lo, double hi, RandomSource& rng) {
  if (!(lo < hi)) {
    throw ConfigError("uniform_init: lo must be < hi, got [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
  Matrix out(rows, cols);
  double* dst = out.data();
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i) {
    dst[i] = rng.uniform(lo, hi);
  }
  return out;
}

Matrix reverse_rows(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (int i = 0; i < a.rows(); ++i) {
    std::copy(a.row_data(i), a.row_data(i) + a.cols(), out.row_data(a.rows() - 1 - i));
  }
  return out;
}

void add_in_place(Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("add_in_place: shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  double* pa = a.data();
  const double* pb = b.data();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) pa[i] += pb[i];
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("hadamard: shape mismatch: " + a.shape_str() + " vs " + b.shape_str());
  }
  Matrix out(a.rows(), a.cols());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
  return out;
}

}  // namespace b2dcnn
