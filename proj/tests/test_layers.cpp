#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "b2dcnn/layers.hpp"
#include "b2dcnn/reference_kernels.hpp"

using namespace b2dcnn;

namespace {

LSTMParams zero_lstm(int hidden, int input) {
  LSTMParams p;
  p.hidden = hidden;
  p.input = input;
  p.W = Matrix(4 * hidden, hidden + input);
  p.b = Matrix(1, 4 * hidden);
  return p;
}

LSTMParams random_lstm(int hidden, int input, RandomSource& rng) {
  LSTMParams p = zero_lstm(hidden, input);
  p.W = uniform_init(4 * hidden, hidden + input, -0.5, 0.5, rng);
  p.b = uniform_init(1, 4 * hidden, -0.5, 0.5, rng);
  return p;
}

}  // namespace

TEST_CASE("embed stacks table rows") {
  Matrix table = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
  Matrix out = embed({0, 2}, table);
  CHECK(out.rows() == 2);
  CHECK(out(0, 0) == 1.0);
  CHECK(out(0, 1) == 2.0);
  CHECK(out(1, 0) == 5.0);
  CHECK(out(1, 1) == 6.0);
}

TEST_CASE("embed rejects out-of-range index with position") {
  Matrix table(3, 2);
  CHECK_THROWS_WITH_AS(embed({0, 3}, table), doctest::Contains("position 1"), DataError);
}

TEST_CASE("embed shape for a seven word sentence") {
  Matrix table(10, 3);
  Matrix out = embed({1, 2, 3, 4, 5, 6, 7}, table);
  CHECK(out.rows() == 7);
  CHECK(out.cols() == 3);
}

TEST_CASE("lstm_step with all-zero parameters") {
  LSTMParams p = zero_lstm(2, 3);
  LSTMState st = lstm_step({0.3, -0.4, 0.9}, zero_state(2), p);
  for (int i = 0; i < 2; ++i) {
    CHECK(st.c[static_cast<std::size_t>(i)] == 0.0);  // i=f=o=0.5, candidate=0
    CHECK(st.h[static_cast<std::size_t>(i)] == 0.0);
  }
}

TEST_CASE("lstm_step zero weights with nonzero previous cell") {
  LSTMParams p = zero_lstm(1, 1);
  LSTMState prev{{1.0}, {0.0}};
  LSTMState st = lstm_step({0.0}, prev, p);
  CHECK(st.c[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(st.h[0] == doctest::Approx(0.5 * std::tanh(0.5)).epsilon(1e-12));
  CHECK(st.h[0] == doctest::Approx(0.23105857863).epsilon(1e-9));
}

TEST_CASE("lstm_step scalar case matches a direct transcription") {
  // h = d_in = 1: spell the cell equations out with plain doubles and
  // compare against the implementation.
  LSTMParams p = zero_lstm(1, 1);
  p.W = Matrix::from_rows({{0.5, -0.3}, {0.2, 0.4}, {-0.1, 0.6}, {0.3, 0.2}});
  p.b = Matrix::from_rows({{0.1, -0.2, 0.3, 0.0}});
  const double h_prev = 0.2;
  const double c_prev = -0.5;
  const double x = 0.7;

  const double a_i = 0.5 * h_prev + -0.3 * x + 0.1;
  const double a_f = 0.2 * h_prev + 0.4 * x + -0.2;
  const double a_o = -0.1 * h_prev + 0.6 * x + 0.3;
  const double a_g = 0.3 * h_prev + 0.2 * x + 0.0;
  const double gate_i = 1.0 / (1.0 + std::exp(-a_i));
  const double gate_f = 1.0 / (1.0 + std::exp(-a_f));
  const double gate_o = 1.0 / (1.0 + std::exp(-a_o));
  const double cand = std::tanh(a_g);
  const double c_t = gate_f * c_prev + gate_i * cand;
  const double h_t = gate_o * std::tanh(c_t);

  LSTMState st = lstm_step({x}, LSTMState{{c_prev}, {h_prev}}, p);
  CHECK(st.c[0] == doctest::Approx(c_t).epsilon(1e-14));
  CHECK(st.h[0] == doctest::Approx(h_t).epsilon(1e-14));
}

TEST_CASE("lstm_step keeps activations in their codomains") {
  RandomSource rng(21);
  LSTMParams p = random_lstm(4, 3, rng);
  LSTMState st = zero_state(4);
  for (int t = 0; t < 32; ++t) {
    Vec x{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    st = lstm_step(x, st, p);
    for (double h : st.h) CHECK(std::abs(h) < 1.0);
    for (double c : st.c) CHECK(std::isfinite(c));
  }
}

TEST_CASE("lstm_sequence degenerate and chained") {
  RandomSource rng(22);
  LSTMParams p = random_lstm(3, 2, rng);
  Matrix x1 = uniform_init(1, 2, -1, 1, rng);
  Matrix out1 = lstm_sequence(x1, p, Direction::Forward);
  LSTMState st = lstm_step(x1.row_vec(0), zero_state(3), p);
  for (int j = 0; j < 3; ++j) CHECK(out1(0, j) == st.h[static_cast<std::size_t>(j)]);

  Matrix x3 = uniform_init(3, 2, -1, 1, rng);
  Matrix out3 = lstm_sequence(x3, p, Direction::Forward);
  LSTMState s = zero_state(3);
  for (int t = 0; t < 3; ++t) {
    s = lstm_step(x3.row_vec(t), s, p);
    for (int j = 0; j < 3; ++j) CHECK(out3(t, j) == s.h[static_cast<std::size_t>(j)]);
  }
}

TEST_CASE("lstm_sequence output shape and empty input error") {
  RandomSource rng(23);
  LSTMParams p = random_lstm(5, 4, rng);
  Matrix x = uniform_init(7, 4, -1, 1, rng);
  CHECK(lstm_sequence(x, p, Direction::Forward).rows() == 7);
  CHECK(lstm_sequence(x, p, Direction::Backward).cols() == 5);
  CHECK_THROWS_AS(lstm_sequence(Matrix(), p, Direction::Forward), ShapeError);
}

TEST_CASE("blstm with zero backward parameters equals the forward pass") {
  RandomSource rng(24);
  LSTMParams fwd = random_lstm(4, 3, rng);
  LSTMParams bwd = zero_lstm(4, 3);  // all-zero rows out of the backward pass
  Matrix x = uniform_init(5, 3, -1, 1, rng);
  Matrix combined = blstm(x, fwd, bwd);
  Matrix fonly = lstm_sequence(x, fwd, Direction::Forward);
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 4; ++j) CHECK(combined(i, j) == fonly(i, j));
  }
}

TEST_CASE("blstm reversal symmetry") {
  RandomSource rng(25);
  LSTMParams fwd = random_lstm(5, 3, rng);
  LSTMParams bwd = random_lstm(5, 3, rng);
  Matrix x = uniform_init(6, 3, -1, 1, rng);
  Matrix lhs = blstm(reverse_rows(x), bwd, fwd);
  Matrix rhs = reverse_rows(blstm(x, fwd, bwd));
  for (int i = 0; i < lhs.rows(); ++i) {
    for (int j = 0; j < lhs.cols(); ++j) {
      CHECK(lhs(i, j) == doctest::Approx(rhs(i, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("blstm shape and hidden-size mismatch") {
  RandomSource rng(26);
  LSTMParams fwd = random_lstm(5, 3, rng);
  LSTMParams bwd = random_lstm(4, 3, rng);
  Matrix x = uniform_init(7, 3, -1, 1, rng);
  CHECK_THROWS_AS(blstm(x, fwd, bwd), ShapeError);
  LSTMParams bwd5 = random_lstm(5, 3, rng);
  Matrix out = blstm(x, fwd, bwd5);
  CHECK(out.rows() == 7);
  CHECK(out.cols() == 5);
}

TEST_CASE("conv2d single window") {
  Matrix h = Matrix::from_rows({{1, 2}, {3, 4}});
  Matrix filter(2, 2, 1.0);
  Matrix out = conv2d(h, filter, 0.0, Activation::Identity);
  CHECK(out.rows() == 1);
  CHECK(out.cols() == 1);
  CHECK(out(0, 0) == 10.0);
}

TEST_CASE("conv2d zero filter gives tanh(bias) everywhere") {
  RandomSource rng(27);
  Matrix h = uniform_init(5, 4, -1, 1, rng);
  Matrix filter(2, 3);
  const double b = 0.37;
  Matrix out = conv2d(h, filter, b, Activation::Tanh);
  for (int i = 0; i < out.rows(); ++i) {
    for (int j = 0; j < out.cols(); ++j) CHECK(out(i, j) == std::tanh(b));
  }
}

TEST_CASE("conv2d narrow output shape") {
  RandomSource rng(28);
  Matrix h = uniform_init(7, 5, -1, 1, rng);
  Matrix filter = uniform_init(2, 2, -1, 1, rng);
  Matrix out = conv2d(h, filter, 0.1, Activation::Tanh);
  CHECK(out.rows() == 6);
  CHECK(out.cols() == 4);
  CHECK_THROWS_AS(conv2d(Matrix(2, 2), Matrix(3, 2), 0.0, Activation::Tanh), ShapeError);
  CHECK_THROWS_AS(conv2d(Matrix(2, 2), Matrix(2, 3), 0.0, Activation::Tanh), ShapeError);
}

TEST_CASE("conv2d linearity with identity activation") {
  RandomSource rng(29);
  Matrix h = uniform_init(6, 5, -2, 2, rng);
  Matrix filter = uniform_init(3, 2, -1, 1, rng);
  const double alpha = 1.7;
  Matrix scaled = h;
  for (std::size_t i = 0; i < scaled.size(); ++i) scaled.data()[i] *= alpha;
  Matrix a = conv2d(scaled, filter, 0.0, Activation::Identity);
  Matrix b = conv2d(h, filter, 0.0, Activation::Identity);
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.cols(); ++j) {
      CHECK(std::abs(a(i, j) - alpha * b(i, j)) < 1e-10);
    }
  }
}

TEST_CASE("conv2d matches the window-enumeration reference") {
  RandomSource rng(30);
  for (int rep = 0; rep < 60; ++rep) {
    const int rows = 1 + static_cast<int>(rng.next_index(12));
    const int cols = 1 + static_cast<int>(rng.next_index(12));
    const int k = 1 + static_cast<int>(rng.next_index(static_cast<std::size_t>(rows)));
    const int d = 1 + static_cast<int>(rng.next_index(static_cast<std::size_t>(cols)));
    Matrix h = uniform_init(rows, cols, -2, 2, rng);
    Matrix filter = uniform_init(k, d, -1, 1, rng);
    const double bias = rng.uniform(-1, 1);
    Matrix fast = conv2d(h, filter, bias, Activation::Tanh);
    Matrix slow = ref::conv2d_brute(h, filter, bias, +[](double x) { return std::tanh(x); });
    REQUIRE(fast.rows() == slow.rows());
    REQUIRE(fast.cols() == slow.cols());
    for (int i = 0; i < fast.rows(); ++i) {
      for (int j = 0; j < fast.cols(); ++j) {
        CHECK(std::abs(fast(i, j) - slow(i, j)) < 1e-10);
      }
    }
  }
}

TEST_CASE("conv_layer per-filter behavior") {
  RandomSource rng(31);
  Matrix h = uniform_init(8, 5, -1, 1, rng);
  ConvParams p;
  p.k = 3;
  p.d = 3;
  p.act = Activation::Tanh;
  Matrix f = uniform_init(3, 3, -1, 1, rng);
  p.filters = {f, f};
  p.biases = Matrix(1, 2);
  p.biases(0, 0) = p.biases(0, 1) = 0.25;
  auto maps = conv_layer(h, p);
  REQUIRE(maps.size() == 2);
  // Duplicate filters produce identical maps; a singleton equals conv2d.
  for (int i = 0; i < maps[0].rows(); ++i) {
    for (int j = 0; j < maps[0].cols(); ++j) CHECK(maps[0](i, j) == maps[1](i, j));
  }
  ConvParams single = p;
  single.filters = {f};
  single.biases = Matrix(1, 1);
  single.biases(0, 0) = 0.25;
  auto one = conv_layer(h, single);
  Matrix direct = conv2d(h, f, 0.25, Activation::Tanh);
  for (int i = 0; i < direct.rows(); ++i) {
    for (int j = 0; j < direct.cols(); ++j) CHECK(one[0](i, j) == direct(i, j));
  }
}

TEST_CASE("conv_layer with 100 filters") {
  RandomSource rng(32);
  Matrix h = uniform_init(8, 5, -1, 1, rng);
  ConvParams p;
  p.k = 3;
  p.d = 3;
  for (int f = 0; f < 100; ++f) p.filters.push_back(uniform_init(3, 3, -1, 1, rng));
  p.biases = uniform_init(1, 100, -1, 1, rng);
  CHECK(conv_layer(h, p).size() == 100);
}

TEST_CASE("maxpool2d worked example") {
  Matrix m(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) m(i, j) = i * 4 + j + 1;  // 1..16 row-major
  }
  Vec out = maxpool2d(m, 2, 2);
  REQUIRE(out.size() == 4);
  CHECK(out[0] == 6.0);
  CHECK(out[1] == 8.0);
  CHECK(out[2] == 14.0);
  CHECK(out[3] == 16.0);
}

TEST_CASE("maxpool2d constant input and figure-scale length") {
  Matrix m(5, 4, 3.25);
  for (double v : maxpool2d(m, 2, 2)) CHECK(v == 3.25);
  RandomSource rng(33);
  Matrix fm = uniform_init(6, 4, -1, 1, rng);
  CHECK(maxpool2d(fm, 2, 2).size() == 6);  // floor(6/2) * floor(4/2)
  CHECK_THROWS_AS(maxpool2d(Matrix(2, 2), 3, 1), ShapeError);
  CHECK_THROWS_AS(maxpool2d(Matrix(2, 2), 1, 3), ShapeError);
}

TEST_CASE("maxpool2d matches the reference on all valid pool sizes") {
  RandomSource rng(34);
  for (int rep = 0; rep < 25; ++rep) {
    const int rows = 1 + static_cast<int>(rng.next_index(20));
    const int cols = 1 + static_cast<int>(rng.next_index(20));
    Matrix m = uniform_init(rows, cols, -5, 5, rng);
    for (int p1 = 1; p1 <= rows; ++p1) {
      for (int p2 = 1; p2 <= cols; ++p2) {
        Vec fast = maxpool2d(m, p1, p2);
        Vec slow = ref::maxpool2d_brute(m, p1, p2);
        REQUIRE(fast.size() ==
                static_cast<std::size_t>((rows / p1) * (cols / p2)));
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) CHECK(fast[i] == slow[i]);
      }
    }
  }
}

TEST_CASE("maxpool2d commutes with constant shift") {
  RandomSource rng(35);
  Matrix m = uniform_init(9, 7, -1, 1, rng);
  const double shift = 2.75;
  Matrix shifted = m;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted.data()[i] += shift;
  Vec a = maxpool2d(m, 2, 3);
  Vec b = maxpool2d(shifted, 2, 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(b[i] == doctest::Approx(a[i] + shift).epsilon(1e-12));
  }
}

TEST_CASE("maxpool2d tie-break routes to first occurrence") {
  Matrix m(2, 2, 1.0);  // all equal
  std::vector<std::pair<int, int>> arg;
  Vec out = maxpool2d_argmax(m, 2, 2, &arg);
  REQUIRE(arg.size() == 1);
  CHECK(arg[0].first == 0);
  CHECK(arg[0].second == 0);
  CHECK(out[0] == 1.0);
}

TEST_CASE("maxpool1d_time basics") {
  Matrix single = Matrix::from_rows({{4, -2, 7}});
  Vec out1 = maxpool1d_time(single);
  CHECK(out1 == Vec{4, -2, 7});
  Matrix m = Matrix::from_rows({{1, 5}, {3, 2}});
  Vec out = maxpool1d_time(m);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == 3.0);
  CHECK(out[1] == 5.0);
  RandomSource rng(36);
  for (int l : {1, 4, 9}) {
    CHECK(maxpool1d_time(uniform_init(l, 6, -1, 1, rng)).size() == 6);
  }
  std::vector<int> rows;
  maxpool1d_time_argmax(Matrix(3, 2, 1.0), &rows);
  CHECK(rows == std::vector<int>{0, 0});  // ties go to the first row
}

TEST_CASE("attention_pool single row and uniform fallback") {
  RandomSource rng(37);
  AttentionParams p;
  p.projection = uniform_init(4, 4, -1, 1, rng);
  p.score = uniform_init(1, 4, -1, 1, rng);
  Matrix one = uniform_init(1, 4, -1, 1, rng);
  Vec out = attention_pool(one, p);
  for (int j = 0; j < 4; ++j) CHECK(out[static_cast<std::size_t>(j)] == one(0, j));

  // Zero projection: all scores equal, so the output is the row mean.
  AttentionParams flat;
  flat.projection = Matrix(4, 4);
  flat.score = uniform_init(1, 4, -1, 1, rng);
  Matrix h = uniform_init(5, 4, -1, 1, rng);
  Vec mean = attention_pool(h, flat);
  for (int j = 0; j < 4; ++j) {
    double expect = 0.0;
    for (int i = 0; i < 5; ++i) expect += h(i, j);
    expect /= 5.0;
    CHECK(mean[static_cast<std::size_t>(j)] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("attention weights form a distribution") {
  RandomSource rng(38);
  AttentionParams p;
  p.projection = uniform_init(6, 6, -1, 1, rng);
  p.score = uniform_init(1, 6, -1, 1, rng);
  for (int rep = 0; rep < 10; ++rep) {
    Matrix h = uniform_init(1 + static_cast<int>(rng.next_index(8)), 6, -2, 2, rng);
    Vec w = attention_weights(h, p);
    double sum = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("dropout contracts") {
  RandomSource rng(39);
  Matrix x = uniform_init(10, 10, -1, 1, rng);
  Matrix eval = dropout(x, 0.7, DropoutMode::Eval, rng);
  Matrix zero = dropout(x, 0.0, DropoutMode::Train, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(eval.data()[i] == x.data()[i]);
    CHECK(zero.data()[i] == x.data()[i]);
  }
  Matrix half = dropout(x, 0.5, DropoutMode::Train, rng);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const bool dropped = half.data()[i] == 0.0;
    if (!dropped) CHECK(half.data()[i] == 2.0 * x.data()[i]);
  }
  CHECK_THROWS_AS(dropout(x, 1.0, DropoutMode::Train, rng), ConfigError);
  CHECK_THROWS_AS(dropout(x, -0.1, DropoutMode::Train, rng), ConfigError);
}

TEST_CASE("dropout survival frequency and mean preservation") {
  RandomSource rng(40);
  const double rate = 0.3;
  Matrix x(250, 400, 1.0);  // 1e5 entries
  Matrix y = dropout(x, rate, DropoutMode::Train, rng);
  const double n = static_cast<double>(x.size());
  std::size_t survivors = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y.data()[i] != 0.0) ++survivors;
    sum += y.data()[i];
  }
  const double q = 1.0 - rate;
  const double se_freq = std::sqrt(rate * q / n);
  CHECK(std::abs(static_cast<double>(survivors) / n - q) < 3.0 * se_freq);
  // Inverted scaling keeps the mean: each output entry has mean 1 and
  // variance rate/q for unit inputs.
  const double se_mean = std::sqrt(rate / q / n);
  CHECK(std::abs(sum / n - 1.0) < 3.0 * se_mean);
}

TEST_CASE("softmax_classify zero parameters give the uniform distribution") {
  SoftmaxParams p;
  p.W = Matrix(4, 3);
  p.b = Matrix(1, 4);
  Classification c = softmax_classify({0.3, -1.0, 0.5}, p);
  CHECK(c.label == 0);
  for (double v : c.probs) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("softmax_classify worked example") {
  SoftmaxParams p;
  p.W = Matrix::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  p.b = Matrix(1, 3);
  Classification c = softmax_classify({2.0, 1.0, 0.5}, p);
  CHECK(c.label == 0);
  CHECK(c.probs[0] == doctest::Approx(0.6285).epsilon(1e-4));
  CHECK(c.probs[1] == doctest::Approx(0.2312).epsilon(1e-4));
  CHECK(c.probs[2] == doctest::Approx(0.1402).epsilon(1e-4));
}

TEST_CASE("softmax_classify distribution, shift invariance, tie break") {
  RandomSource rng(41);
  SoftmaxParams p;
  p.W = uniform_init(5, 4, -1, 1, rng);
  p.b = uniform_init(1, 5, -1, 1, rng);
  Vec h{0.2, -0.7, 1.1, 0.4};
  Classification c = softmax_classify(h, p);
  double sum = 0.0;
  for (double v : c.probs) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

  SoftmaxParams shifted = p;
  for (int j = 0; j < 5; ++j) shifted.b(0, j) += 100.0;  // same constant on all logits
  CHECK(softmax_classify(h, shifted).label == c.label);

  SoftmaxParams ties;
  ties.W = Matrix(3, 2);
  ties.b = Matrix(1, 3);
  CHECK(softmax_classify({1.0, 1.0}, ties).label == 0);

  CHECK_THROWS_AS(softmax_classify({1.0, 2.0, 3.0}, p), ShapeError);
}
