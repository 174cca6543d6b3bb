#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "b2dcnn/gradients.hpp"
#include "b2dcnn/optimizer.hpp"

using namespace b2dcnn;

namespace {

ModelDims small_dims(Variant v, int h = 8, int d_w = 8, int seq = 5) {
  ModelDims dims;
  dims.vocab = 12;
  dims.d_w = d_w;
  dims.hidden = h;
  dims.n_classes = 3;
  dims.n_filters = 2;
  dims.k = 2;
  dims.d = 2;
  dims.p1 = 2;
  dims.p2 = 2;
  if (v == Variant::BLSTM2DPool || v == Variant::BLSTM2DCNN) {
    dims.seq_len = seq;
  }
  return dims;
}

std::vector<int> small_tokens(RandomSource& rng, int len, int vocab) {
  std::vector<int> tokens(static_cast<std::size_t>(len));
  for (auto& t : tokens) {
    t = 1 + static_cast<int>(rng.next_index(static_cast<std::size_t>(vocab - 1)));
  }
  return tokens;
}

}  // namespace

TEST_CASE("softmax logit gradient vanishes on a perfect prediction") {
  // d objective / d logit = (probs - onehot) / m: literally zero when the
  // predicted distribution equals the one-hot target.
  const Vec probs{0.0, 1.0, 0.0};
  const int target = 1;
  for (int j = 0; j < 3; ++j) {
    const double grad = (probs[static_cast<std::size_t>(j)] - (j == target ? 1.0 : 0.0)) / 3.0;
    CHECK(grad == 0.0);
  }
}

TEST_CASE("embedding rows for absent tokens have zero gradient") {
  RandomSource rng(50);
  const Variant v = Variant::BLSTM2DCNN;
  ModelDims dims = small_dims(v);
  ModelParams params = init_params(v, dims, rng);
  const std::vector<int> tokens{3, 5, 3};
  RandomSource drop(1);
  ForwardCache cache = forward_cached(tokens, 1, params, DropoutRates{}, DropoutMode::Eval, drop);
  BackwardResult res = backward(cache, params, 0.0);
  const Matrix& ge = res.grads.tensors().embedding;
  for (int row = 0; row < dims.vocab; ++row) {
    const bool used = row == 3 || row == 5;
    double norm = 0.0;
    for (int j = 0; j < dims.d_w; ++j) norm += std::abs(ge(row, j));
    if (used) {
      CHECK(norm > 0.0);
    } else {
      CHECK(norm == 0.0);
    }
  }
}

TEST_CASE("gradient check passes for all four variants") {
  for (Variant v : {Variant::BLSTM, Variant::BLSTMAtt, Variant::BLSTM2DPool,
                    Variant::BLSTM2DCNN}) {
    CAPTURE(to_string(v));
    RandomSource rng(51 + static_cast<std::uint64_t>(v));
    ModelDims dims = small_dims(v);
    ModelParams params = init_params(v, dims, rng);
    const auto tokens = small_tokens(rng, 5, dims.vocab);
    const int target = static_cast<int>(rng.next_index(3));
    FiniteDiffReport report = finite_diff_check(tokens, target, params, 1e-5);
    CHECK(report.pass(1e-4));
    for (const auto& g : report.groups) {
      CAPTURE(g.group);
      CHECK(g.max_rel_err < 1e-4);
      CHECK(g.checked > 0);
    }
  }
}

TEST_CASE("eval-mode forward ignores configured dropout rates") {
  RandomSource rng(55);
  ModelDims dims = small_dims(Variant::BLSTM2DCNN);
  ModelParams params = init_params(Variant::BLSTM2DCNN, dims, rng);
  const auto tokens = small_tokens(rng, 5, dims.vocab);
  RandomSource d1(7);
  RandomSource d2(7);
  ForwardCache eval_cache =
      forward_cached(tokens, 2, params, DropoutRates{0.5, 0.2, 0.4}, DropoutMode::Eval, d1);
  ForwardCache plain_cache =
      forward_cached(tokens, 2, params, DropoutRates{}, DropoutMode::Eval, d2);
  BackwardResult a = backward(eval_cache, params, 0.0);
  BackwardResult b = backward(plain_cache, params, 0.0);
  CHECK(a.loss == b.loss);
}

TEST_CASE("dropout backward reuses the stored mask") {
  // With a fixed mask the gradient through dropout is the mask itself:
  // a dropped position contributes no embedding gradient.
  RandomSource rng(56);
  ModelDims dims = small_dims(Variant::BLSTM);
  ModelParams params = init_params(Variant::BLSTM, dims, rng);
  const auto tokens = small_tokens(rng, 4, dims.vocab);
  RandomSource drop(99);
  ForwardCache cache =
      forward_cached(tokens, 0, params, DropoutRates{0.5, 0.0, 0.0}, DropoutMode::Train, drop);
  BackwardResult res = backward(cache, params, 0.0);
  for (std::size_t pos = 0; pos < tokens.size(); ++pos) {
    bool row_fully_masked = true;
    for (std::size_t other = 0; other < tokens.size(); ++other) {
      if (tokens[other] != tokens[pos]) continue;
      for (int j = 0; j < dims.d_w; ++j) {
        if (cache.embed_mask(static_cast<int>(other), j) != 0.0) row_fully_masked = false;
      }
    }
    if (!row_fully_masked) continue;
    double norm = 0.0;
    for (int j = 0; j < dims.d_w; ++j) {
      norm += std::abs(res.grads.tensors().embedding(tokens[pos], j));
    }
    CHECK(norm == 0.0);
  }
}

TEST_CASE("accumulated gradients equal the gradient of the summed loss") {
  RandomSource rng(57);
  ModelDims dims = small_dims(Variant::BLSTM2DCNN);
  ModelParams params = init_params(Variant::BLSTM2DCNN, dims, rng);
  const auto t1 = small_tokens(rng, 5, dims.vocab);
  const auto t2 = small_tokens(rng, 4, dims.vocab);
  RandomSource unused(0);
  ForwardCache c1 = forward_cached(t1, 0, params, DropoutRates{}, DropoutMode::Eval, unused);
  ForwardCache c2 = forward_cached(t2, 2, params, DropoutRates{}, DropoutMode::Eval, unused);
  BackwardResult r1 = backward(c1, params, 0.0);
  BackwardResult r2 = backward(c2, params, 0.0);

  // Two reduction routes: direct sum vs mean-of-two scaled back up.
  GradientSet direct = GradientSet::zeros_like(params);
  direct.add_scaled(r1.grads, 1.0);
  direct.add_scaled(r2.grads, 1.0);
  GradientSet halves = GradientSet::zeros_like(params);
  halves.add_scaled(r1.grads, 0.5);
  halves.add_scaled(r2.grads, 0.5);
  halves.scale(2.0);

  auto a = tensor_refs(direct.tensors());
  auto b = tensor_refs(halves.tensors());
  for (std::size_t t = 0; t < a.size(); ++t) {
    for (std::size_t i = 0; i < a[t].tensor->size(); ++i) {
      CHECK(std::abs(a[t].tensor->data()[i] - b[t].tensor->data()[i]) < 1e-10);
    }
  }
}

TEST_CASE("L2 shifts every regularized gradient by exactly 2 lambda theta") {
  RandomSource rng(58);
  const double lambda = 3e-4;
  for (Variant v : {Variant::BLSTMAtt, Variant::BLSTM2DCNN}) {
    ModelDims dims = small_dims(v);
    ModelParams params = init_params(v, dims, rng);
    const auto tokens = small_tokens(rng, 5, dims.vocab);
    RandomSource unused(0);
    ForwardCache cache =
        forward_cached(tokens, 1, params, DropoutRates{}, DropoutMode::Eval, unused);
    BackwardResult plain = backward(cache, params, 0.0);
    BackwardResult reg = backward(cache, params, lambda);
    auto g0 = tensor_refs(plain.grads.tensors());
    auto g1 = tensor_refs(reg.grads.tensors());
    auto p = tensor_refs(params);
    for (std::size_t t = 0; t < g0.size(); ++t) {
      for (std::size_t i = 0; i < g0[t].tensor->size(); ++i) {
        const double expect = g0[t].tensor->data()[i] +
                              (g0[t].regularized ? 2.0 * lambda * p[t].tensor->data()[i] : 0.0);
        CHECK(std::abs(g1[t].tensor->data()[i] - expect) < 1e-12);
      }
    }
  }
}

TEST_CASE("finite_diff_check flags a corrupted conv gradient") {
  RandomSource rng(59);
  ModelDims dims = small_dims(Variant::BLSTM2DCNN);
  ModelParams params = init_params(Variant::BLSTM2DCNN, dims, rng);
  // Boost the classifier weights and embeddings so the conv-filter gradients
  // exceed 1 in magnitude: a sign flip then reads as relative error 2 under
  // |a - n| / max(1, |a|, |n|).
  for (std::size_t i = 0; i < params.out.W.size(); ++i) params.out.W.data()[i] *= 150.0;
  for (std::size_t i = 0; i < params.embedding.size(); ++i) params.embedding.data()[i] *= 20.0;
  const auto tokens = small_tokens(rng, 5, dims.vocab);
  const int target = (forward_eval(tokens, params).label + 1) % 3;

  FiniteDiffReport good = finite_diff_check(tokens, target, params, 0.0, 1e-5, 20, 0x5eed);
  CHECK(good.pass(1e-4));

  FiniteDiffReport bad = finite_diff_check(tokens, target, params, 0.0, 1e-5, 20, 0x5eed,
                                           /*corrupt_conv_grads=*/true);
  CHECK_FALSE(bad.pass(1e-4));
  double conv_err = 0.0;
  for (const auto& g : bad.groups) {
    if (g.group.rfind("conv.filter", 0) == 0) {
      conv_err = std::max(conv_err, g.max_rel_err);
    } else if (g.group != "embedding") {
      // Only the conv gradients were corrupted; everything else still passes.
      CHECK(g.max_rel_err < 1e-4);
    }
  }
  CHECK(conv_err == doctest::Approx(2.0).epsilon(1e-3));
}

TEST_CASE("epsilon sweep holds the threshold") {
  RandomSource rng(60);
  ModelDims dims = small_dims(Variant::BLSTM2DCNN);
  ModelParams params = init_params(Variant::BLSTM2DCNN, dims, rng);
  const auto tokens = small_tokens(rng, 5, dims.vocab);
  for (double eps : {1e-4, 1e-5, 1e-6}) {
    CAPTURE(eps);
    FiniteDiffReport report = finite_diff_check(tokens, 0, params, 1e-5, eps);
    CHECK(report.pass(1e-4));
  }
}

TEST_CASE("gradcheck covers padded short sentences") {
  // Two tokens under a 5-row fixed length: gradients must be exact through
  // the zero-row padding too.
  RandomSource rng(61);
  for (Variant v : {Variant::BLSTM2DPool, Variant::BLSTM2DCNN}) {
    ModelDims dims = small_dims(v);
    ModelParams params = init_params(v, dims, rng);
    const auto tokens = small_tokens(rng, 2, dims.vocab);
    FiniteDiffReport report = finite_diff_check(tokens, 2, params, 1e-5);
    CHECK(report.pass(1e-4));
  }
}

TEST_CASE("backward rejects a cache built for different params") {
  RandomSource rng(62);
  ModelDims dims = small_dims(Variant::BLSTM);
  ModelParams params = init_params(Variant::BLSTM, dims, rng);
  const auto tokens = small_tokens(rng, 4, dims.vocab);
  RandomSource unused(0);
  ForwardCache cache = forward_cached(tokens, 1, params, DropoutRates{}, DropoutMode::Eval, unused);
  ModelDims other = small_dims(Variant::BLSTM, 6, 8);
  ModelParams mismatched = init_params(Variant::BLSTM, other, rng);
  CHECK_THROWS_AS(backward(cache, mismatched, 0.0), ShapeError);
}

TEST_CASE("forward caches are deterministic given the rng seed") {
  RandomSource rng(63);
  ModelDims dims = small_dims(Variant::BLSTM2DCNN);
  ModelParams params = init_params(Variant::BLSTM2DCNN, dims, rng);
  const auto tokens = small_tokens(rng, 5, dims.vocab);
  RandomSource d1(123);
  RandomSource d2(123);
  ForwardCache a = forward_cached(tokens, 0, params, DropoutRates{0.5, 0.2, 0.4},
                                  DropoutMode::Train, d1);
  ForwardCache b = forward_cached(tokens, 0, params, DropoutRates{0.5, 0.2, 0.4},
                                  DropoutMode::Train, d2);
  REQUIRE(a.probs.size() == b.probs.size());
  for (std::size_t i = 0; i < a.probs.size(); ++i) CHECK(a.probs[i] == b.probs[i]);
}
