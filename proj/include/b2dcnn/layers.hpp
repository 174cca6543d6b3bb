#pragma once

#include <utility>
#include <vector>

#include "b2dcnn/matrix.hpp"

namespace b2dcnn {

// Looks up one embedding row per token index; row i of the result is the
// table row for tokens[i].
Matrix embed(const std::vector<int>& tokens, const Matrix& table);

// Stacked gate weights over [h_prev, x], gate blocks in the fixed order
// input, forget, output, candidate (h rows each). The bias is an addition to
// the plain affine map; checkpointing preserves the block order.
struct LSTMParams {
  Matrix W;  // 4h x (h + input)
  Matrix b;  // 1 x 4h
  int hidden = 0;
  int input = 0;
};

struct LSTMState {
  Vec c;  // cell
  Vec h;  // hidden
};

LSTMState zero_state(int hidden);
LSTMState lstm_step(const Vec& x, const LSTMState& prev, const LSTMParams& p);

enum class Direction { Forward, Backward };

// Runs the cell over every row of x from a zero initial state. Row t of the
// output is h_t for input position t in both directions; the backward
// direction consumes rows last-to-first.
Matrix lstm_sequence(const Matrix& x, const LSTMParams& p, Direction dir);

// Forward and backward passes combined by element-wise sum, so the output
// feature dimension stays h.
Matrix blstm(const Matrix& x, const LSTMParams& fwd, const LSTMParams& bwd);

enum class Activation { Tanh, Identity };

// Narrow 2D convolution (cross-correlation): output (i, j) is
// act(<filter, window of input at (i, j)> + bias), defined only where the
// filter fits entirely inside the input.
Matrix conv2d(const Matrix& input, const Matrix& filter, double bias, Activation act);

struct ConvParams {
  std::vector<Matrix> filters;  // each k x d
  Matrix biases;                // 1 x n_filters
  int k = 0;
  int d = 0;
  Activation act = Activation::Tanh;

  int n_filters() const { return static_cast<int>(filters.size()); }
};

std::vector<Matrix> conv_layer(const Matrix& input, const ConvParams& p);

// Maxima of non-overlapping p1 x p2 windows tiled from the top-left with
// stride (p1, p2); trailing rows/columns that do not fill a window are
// dropped. Output length is floor(rows/p1) * floor(cols/p2), row-major.
Vec maxpool2d(const Matrix& input, int p1, int p2);

// Same, also reporting the input coordinates of each window maximum (ties
// resolved to the first occurrence in row-major window scan).
Vec maxpool2d_argmax(const Matrix& input, int p1, int p2,
                     std::vector<std::pair<int, int>>* argmax);

// Per-column maxima over rows (pooling over the time-step dimension only).
Vec maxpool1d_time(const Matrix& input);
Vec maxpool1d_time_argmax(const Matrix& input, std::vector<int>* argmax_rows);

struct AttentionParams {
  Matrix projection;  // h x h
  Matrix score;       // 1 x h
};

// Single-hop attention: score_i = score . tanh(projection h_i),
// weights = softmax(scores), output = sum_i weight_i h_i.
Vec attention_pool(const Matrix& input, const AttentionParams& p);
Vec attention_weights(const Matrix& input, const AttentionParams& p);

enum class DropoutMode { Train, Eval };

// Inverted dropout: in train mode each entry is zeroed with probability
// rate and survivors are scaled by 1/(1-rate); eval mode is the identity.
Matrix dropout(const Matrix& x, double rate, DropoutMode mode, RandomSource& rng);

// The multiplicative mask dropout applies in train mode: entries are 0 or
// 1/(1-rate). Exposed so training can cache masks for the backward pass.
Matrix dropout_mask(int rows, int cols, double rate, RandomSource& rng);

struct SoftmaxParams {
  Matrix W;  // m x dim(h*)
  Matrix b;  // 1 x m
};

struct Classification {
  Vec probs;
  int label = 0;
};

// Stable softmax over logits (max subtracted before exponentiation).
Vec softmax(const Vec& logits);

// probs = softmax(W h* + b); label = argmax with ties broken toward the
// lowest class index.
Classification softmax_classify(const Vec& h_star, const SoftmaxParams& p);

}  // namespace b2dcnn
