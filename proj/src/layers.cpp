#include "b2dcnn/layers.hpp"

#include <algorithm>
#include <cmath>

namespace b2dcnn {

Matrix embed(const std::vector<int>& tokens, const Matrix& table) {
  if (tokens.empty()) {
    throw ShapeError("embed: empty token sequence");
  }
  Matrix out(static_cast<int>(tokens.size()), table.cols());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const int t = tokens[i];
    if (t < 0 || t >= table.rows()) {
      throw DataError("embed: token index " + std::to_string(t) + " out of range [0, " +
                      std::to_string(table.rows()) + ") at position " + std::to_string(i));
    }
    std::copy(table.row_data(t), table.row_data(t) + table.cols(),
              out.row_data(static_cast<int>(i)));
  }
  return out;
}

LSTMState zero_state(int hidden) {
  return LSTMState{Vec(static_cast<std::size_t>(hidden), 0.0),
                   Vec(static_cast<std::size_t>(hidden), 0.0)};
}

namespace {

void check_lstm_shapes(const LSTMParams& p) {
  if (p.W.rows() != 4 * p.hidden || p.W.cols() != p.hidden + p.input ||
      p.b.rows() != 1 || p.b.cols() != 4 * p.hidden) {
    throw ShapeError("lstm: parameter shapes inconsistent with hidden=" +
                     std::to_string(p.hidden) + ", input=" + std::to_string(p.input));
  }
}

// One cell update; writes post-activation gate values [i f o g] into gates
// (length 4h) and the new cell/tanh(cell)/hidden values.
void lstm_step_into(const double* x, const Vec& prev_h, const Vec& prev_c, const LSTMParams& p,
                    double* gates, double* cell, double* tanh_cell, double* hidden) {
  const int h = p.hidden;
  const int din = p.input;
  Vec z(static_cast<std::size_t>(h + din));
  std::copy(prev_h.begin(), prev_h.end(), z.begin());
  std::copy(x, x + din, z.begin() + h);
  Vec a = matvec(p.W, z);
  const double* bias = p.b.row_data(0);
  for (int i = 0; i < 4 * h; ++i) a[i] += bias[i];
  for (int i = 0; i < h; ++i) {
    gates[i] = sigmoid(a[i]);              // input gate
    gates[h + i] = sigmoid(a[h + i]);      // forget gate
    gates[2 * h + i] = sigmoid(a[2 * h + i]);  // output gate
    gates[3 * h + i] = std::tanh(a[3 * h + i]);  // candidate
  }
  for (int i = 0; i < h; ++i) {
    const double c = gates[h + i] * prev_c[i] + gates[i] * gates[3 * h + i];
    cell[i] = c;
    tanh_cell[i] = std::tanh(c);
    hidden[i] = gates[2 * h + i] * tanh_cell[i];
  }
}

}  // namespace

LSTMState lstm_step(const Vec& x, const LSTMState& prev, const LSTMParams& p) {
  check_lstm_shapes(p);
  if (static_cast<int>(x.size()) != p.input || static_cast<int>(prev.h.size()) != p.hidden ||
      static_cast<int>(prev.c.size()) != p.hidden) {
    throw ShapeError("lstm_step: input/state sizes do not match parameters");
  }
  const std::size_t h = static_cast<std::size_t>(p.hidden);
  Vec gates(4 * h), cell(h), tanh_cell(h), hidden(h);
  lstm_step_into(x.data(), prev.h, prev.c, p, gates.data(), cell.data(), tanh_cell.data(),
                 hidden.data());
  return LSTMState{std::move(cell), std::move(hidden)};
}

Matrix lstm_sequence(const Matrix& x, const LSTMParams& p, Direction dir) {
  check_lstm_shapes(p);
  if (x.rows() < 1) {
    throw ShapeError("lstm_sequence: empty input sequence");
  }
  if (x.cols() != p.input) {
    throw ShapeError("lstm_sequence: input width " + std::to_string(x.cols()) +
                     " does not match d_in=" + std::to_string(p.input));
  }
  const Matrix input = dir == Direction::Forward ? x : reverse_rows(x);
  const int l = input.rows();
  const std::size_t h = static_cast<std::size_t>(p.hidden);
  Matrix out(l, p.hidden);
  Vec gates(4 * h), cell(h), tanh_cell(h);
  LSTMState st = zero_state(p.hidden);
  for (int t = 0; t < l; ++t) {
    lstm_step_into(input.row_data(t), st.h, st.c, p, gates.data(), cell.data(), tanh_cell.data(),
                   out.row_data(t));
    st.c.assign(cell.begin(), cell.end());
    st.h.assign(out.row_data(t), out.row_data(t) + p.hidden);
  }
  return dir == Direction::Forward ? out : reverse_rows(out);
}

Matrix blstm(const Matrix& x, const LSTMParams& fwd, const LSTMParams& bwd) {
  if (fwd.hidden != bwd.hidden) {
    throw ShapeError("blstm: directions disagree on hidden size: " + std::to_string(fwd.hidden) +
                     " vs " + std::to_string(bwd.hidden));
  }
  Matrix out = lstm_sequence(x, fwd, Direction::Forward);
  add_in_place(out, lstm_sequence(x, bwd, Direction::Backward));
  return out;
}

Matrix conv2d(const Matrix& input, const Matrix& filter, double bias, Activation act) {
  const int k = filter.rows();
  const int d = filter.cols();
  if (k > input.rows() || d > input.cols()) {
    throw ShapeError("conv2d: filter " + filter.shape_str() + " larger than input " +
                     input.shape_str());
  }
  const int out_rows = input.rows() - k + 1;
  const int out_cols = input.cols() - d + 1;
  Matrix out(out_rows, out_cols);
  const bool big = static_cast<long long>(out_rows) * out_cols * k * d >= (1LL << 18);
#pragma omp parallel for schedule(static) if (big)
  for (int i = 0; i < out_rows; ++i) {
    for (int j = 0; j < out_cols; ++j) {
      double sum = bias;
      for (int a = 0; a < k; ++a) {
        const double* in_row = input.row_data(i + a) + j;
        const double* f_row = filter.row_data(a);
        for (int b = 0; b < d; ++b) {
          sum += f_row[b] * in_row[b];
        }
      }
      out(i, j) = act == Activation::Tanh ? std::tanh(sum) : sum;
    }
  }
  return out;
}

std::vector<Matrix> conv_layer(const Matrix& input, const ConvParams& p) {
  std::vector<Matrix> maps(p.filters.size());
  for (std::size_t f = 0; f < p.filters.size(); ++f) {
    maps[f] = conv2d(input, p.filters[f], p.biases(0, static_cast<int>(f)), p.act);
  }
  return maps;
}

Vec maxpool2d_argmax(const Matrix& input, int p1, int p2,
                     std::vector<std::pair<int, int>>* argmax) {
  if (p1 < 1 || p2 < 1 || p1 > input.rows() || p2 > input.cols()) {
    throw ShapeError("maxpool2d: pool " + std::to_string(p1) + "x" + std::to_string(p2) +
                     " invalid for input " + input.shape_str());
  }
  const int tiles_r = input.rows() / p1;
  const int tiles_c = input.cols() / p2;
  Vec out;
  out.reserve(static_cast<std::size_t>(tiles_r) * tiles_c);
  if (argmax) {
    argmax->clear();
    argmax->reserve(out.capacity());
  }
  for (int tr = 0; tr < tiles_r; ++tr) {
    for (int tc = 0; tc < tiles_c; ++tc) {
      int best_r = tr * p1;
      int best_c = tc * p2;
      double best = input(best_r, best_c);
      for (int a = 0; a < p1; ++a) {
        for (int b = 0; b < p2; ++b) {
          const double v = input(tr * p1 + a, tc * p2 + b);
          if (v > best) {
            best = v;
            best_r = tr * p1 + a;
            best_c = tc * p2 + b;
          }
        }
      }
      out.push_back(best);
      if (argmax) argmax->emplace_back(best_r, best_c);
    }
  }
  return out;
}

Vec maxpool2d(const Matrix& input, int p1, int p2) {
  return maxpool2d_argmax(input, p1, p2, nullptr);
}

Vec maxpool1d_time_argmax(const Matrix& input, std::vector<int>* argmax_rows) {
  if (input.rows() < 1) {
    throw ShapeError("maxpool1d_time: empty input");
  }
  Vec out(static_cast<std::size_t>(input.cols()));
  if (argmax_rows) argmax_rows->assign(static_cast<std::size_t>(input.cols()), 0);
  for (int j = 0; j < input.cols(); ++j) {
    double best = input(0, j);
    int best_r = 0;
    for (int i = 1; i < input.rows(); ++i) {
      if (input(i, j) > best) {
        best = input(i, j);
        best_r = i;
      }
    }
    out[static_cast<std::size_t>(j)] = best;
    if (argmax_rows) (*argmax_rows)[static_cast<std::size_t>(j)] = best_r;
  }
  return out;
}

Vec maxpool1d_time(const Matrix& input) { return maxpool1d_time_argmax(input, nullptr); }

Vec attention_weights(const Matrix& input, const AttentionParams& p) {
  const int h = input.cols();
  if (p.projection.rows() != h || p.projection.cols() != h || p.score.rows() != 1 ||
      p.score.cols() != h) {
    throw ShapeError("attention: parameter shapes do not match feature dimension " +
                     std::to_string(h));
  }
  const int l = input.rows();
  Vec scores(static_cast<std::size_t>(l));
  const double* v = p.score.row_data(0);
  for (int i = 0; i < l; ++i) {
    Vec u = matvec(p.projection, input.row_vec(i));
    double s = 0.0;
    for (int j = 0; j < h; ++j) s += v[j] * std::tanh(u[j]);
    scores[static_cast<std::size_t>(i)] = s;
  }
  return softmax(scores);
}

Vec attention_pool(const Matrix& input, const AttentionParams& p) {
  const Vec alpha = attention_weights(input, p);
  Vec out(static_cast<std::size_t>(input.cols()), 0.0);
  for (int i = 0; i < input.rows(); ++i) {
    const double a = alpha[static_cast<std::size_t>(i)];
    const double* row = input.row_data(i);
    for (int j = 0; j < input.cols(); ++j) out[static_cast<std::size_t>(j)] += a * row[j];
  }
  return out;
}

Matrix dropout_mask(int rows, int cols, double rate, RandomSource& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  Matrix mask(rows, cols);
  const double scale = 1.0 / (1.0 - rate);
  double* m = mask.data();
  const std::size_t n = mask.size();
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = rng.next_unit() < rate ? 0.0 : scale;
  }
  return mask;
}

Matrix dropout(const Matrix& x, double rate, DropoutMode mode, RandomSource& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
  if (mode == DropoutMode::Eval) {
    return x;
  }
  return hadamard(x, dropout_mask(x.rows(), x.cols(), rate, rng));
}

Vec softmax(const Vec& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

Classification softmax_classify(const Vec& h_star, const SoftmaxParams& p) {
  if (p.W.cols() != static_cast<int>(h_star.size())) {
    throw ShapeError("softmax_classify: input length " + std::to_string(h_star.size()) +
                     " does not match weight shape " + p.W.shape_str());
  }
  Vec logits = matvec(p.W, h_star);
  const double* bias = p.b.row_data(0);
  for (std::size_t i = 0; i < logits.size(); ++i) logits[i] += bias[i];
  Classification result;
  result.probs = softmax(logits);
  result.label = 0;
  for (std::size_t i = 1; i < result.probs.size(); ++i) {
    if (result.probs[i] > result.probs[static_cast<std::size_t>(result.label)]) {
      result.label = static_cast<int>(i);
    }
  }
  return result;
}

}  // namespace b2dcnn
