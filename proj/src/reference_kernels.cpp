#include "b2dcnn/reference_kernels.hpp"

#include <algorithm>
#include <numeric>

namespace b2dcnn::ref {

Matrix matmul_naive(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul_naive: inner dimensions disagree: " + a.shape_str() + " vs " +
                     b.shape_str());
  }
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.cols(); ++j) {
      double sum = 0.0;
      for (int k = 0; k < a.cols(); ++k) {
        sum += a(i, k) * b(k, j);
      }
      out(i, j) = sum;
    }
  }
  return out;
}

Matrix conv2d_brute(const Matrix& input, const Matrix& filter, double bias,
                    double (*act)(double)) {
  const int k = filter.rows();
  const int d = filter.cols();
  if (k > input.rows() || d > input.cols()) {
    throw ShapeError("conv2d_brute: filter " + filter.shape_str() + " larger than input " +
                     input.shape_str());
  }
  const int out_rows = input.rows() - k + 1;
  const int out_cols = input.cols() - d + 1;
  Matrix out(out_rows, out_cols);
  std::vector<double> window(static_cast<std::size_t>(k) * d);
  for (int i = 0; i < out_rows; ++i) {
    for (int j = 0; j < out_cols; ++j) {
      std::size_t w = 0;
      for (int a = 0; a < k; ++a) {
        for (int b = 0; b < d; ++b) {
          window[w++] = input(i + a, j + b);
        }
      }
      const double dot =
          std::inner_product(window.begin(), window.end(), filter.data(), 0.0);
      out(i, j) = act(dot + bias);
    }
  }
  return out;
}

std::vector<double> maxpool2d_brute(const Matrix& input, int p1, int p2) {
  if (p1 < 1 || p2 < 1 || p1 > input.rows() || p2 > input.cols()) {
    throw ShapeError("maxpool2d_brute: pool " + std::to_string(p1) + "x" + std::to_string(p2) +
                     " invalid for input " + input.shape_str());
  }
  const int tiles_r = input.rows() / p1;
  const int tiles_c = input.cols() / p2;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(tiles_r) * tiles_c);
  std::vector<double> window;
  for (int tr = 0; tr < tiles_r; ++tr) {
    for (int tc = 0; tc < tiles_c; ++tc) {
      window.clear();
      for (int a = 0; a < p1; ++a) {
        for (int b = 0; b < p2; ++b) {
          window.push_back(input(tr * p1 + a, tc * p2 + b));
        }
      }
      out.push_back(*std::max_element(window.begin(), window.end()));
    }
  }
  return out;
}

}  // namespace b2dcnn::ref
