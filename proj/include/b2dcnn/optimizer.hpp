#pragma once

#include "b2dcnn/gradients.hpp"
#include "b2dcnn/model.hpp"

namespace b2dcnn {

struct LossConfig {
  // L2 coefficient. The regularized set is every weight tensor marked
  // `regularized` in tensor_refs: LSTM, convolution, attention, and softmax
  // weights; biases and the embedding table are excluded.
  double lambda = 0.0;
};

// Sum of squares over the regularized tensors.
double l2_sum(const ModelParams& params);

// Per-example objective: -(1/m) log probs[target] + lambda * l2_sum(params),
// m the number of classes. probs[target] below 1e-12 is clamped before the
// log; the clamp is reported through `clamped` so training can surface it.
double cross_entropy_loss(const Vec& probs, int target, const ModelParams& params,
                          const LossConfig& cfg, bool* clamped = nullptr);

// Per-parameter running averages of squared gradients and squared updates.
struct AdaDeltaState {
  ModelParams eg2;  // E[g^2]
  ModelParams ex2;  // E[dx^2]
  double rho = 0.95;
  double eps = 1e-6;
  double lr = 1.0;

  static AdaDeltaState zeros_like(const ModelParams& p, double rho = 0.95, double eps = 1e-6,
                                  double lr = 1.0);
};

// Per coordinate:
//   E[g^2]  <- rho E[g^2] + (1-rho) g^2
//   delta    = -(sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps)) g
//   E[dx^2] <- rho E[dx^2] + (1-rho) delta^2
//   theta   <- theta + lr delta
void adadelta_update(ModelParams& params, const GradientSet& grads, AdaDeltaState& state);

}  // namespace b2dcnn
