#pragma once

#include <vector>

#include "b2dcnn/matrix.hpp"

namespace b2dcnn::ref {

// Serial reference implementations, written as straight transcriptions of the
// definitions. They are kept deliberately independent of the production
// kernels: tests compare the two paths and the benchmark tool times them
// against each other. Not for use on hot paths.

Matrix matmul_naive(const Matrix& a, const Matrix& b);

// Narrow 2D cross-correlation over every window where the filter fits,
// computed by gathering each window and taking an inner product.
// act is applied entrywise to (window dot filter) + bias.
Matrix conv2d_brute(const Matrix& input, const Matrix& filter, double bias,
                    double (*act)(double));

// Non-overlapping p1 x p2 window maxima, tiled from the top-left, trailing
// remainder dropped; window maxima concatenated row-major.
std::vector<double> maxpool2d_brute(const Matrix& input, int p1, int p2);

inline double identity(double x) { return x; }

}  // namespace b2dcnn::ref
