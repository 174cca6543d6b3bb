#include "b2dcnn/optimizer.hpp"

#include <cmath>

namespace b2dcnn {

double l2_sum(const ModelParams& params) {
  double sum = 0.0;
  for (const auto& ref : tensor_refs(params)) {
    if (!ref.regularized) continue;
    const double* d = ref.tensor->data();
    const std::size_t n = ref.tensor->size();
    for (std::size_t i = 0; i < n; ++i) sum += d[i] * d[i];
  }
  return sum;
}

double cross_entropy_loss(const Vec& probs, int target, const ModelParams& params,
                          const LossConfig& cfg, bool* clamped) {
  if (target < 0 || target >= static_cast<int>(probs.size())) {
    throw ShapeError("cross_entropy_loss: target " + std::to_string(target) +
                     " out of range for " + std::to_string(probs.size()) + " classes");
  }
  if (cfg.lambda < 0.0) {
    throw ConfigError("cross_entropy_loss: lambda must be >= 0");
  }
  double p = probs[static_cast<std::size_t>(target)];
  if (p < 1e-12) {
    p = 1e-12;
    if (clamped) *clamped = true;
  }
  const double m = static_cast<double>(probs.size());
  double loss = -std::log(p) / m;
  if (cfg.lambda != 0.0) {
    loss += cfg.lambda * l2_sum(params);
  }
  return loss;
}

AdaDeltaState AdaDeltaState::zeros_like(const ModelParams& p, double rho, double eps, double lr) {
  AdaDeltaState st;
  st.eg2 = make_params_shell(p.variant, p.dims);
  st.ex2 = make_params_shell(p.variant, p.dims);
  st.rho = rho;
  st.eps = eps;
  st.lr = lr;
  return st;
}

void adadelta_update(ModelParams& params, const GradientSet& grads, AdaDeltaState& state) {
  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(grads.tensors());
  auto erefs = tensor_refs(state.eg2);
  auto xrefs = tensor_refs(state.ex2);
  if (prefs.size() != grefs.size() || prefs.size() != erefs.size() ||
      prefs.size() != xrefs.size()) {
    throw ShapeError("adadelta_update: tensor sets disagree");
  }
  const double rho = state.rho;
  const double eps = state.eps;
  const double lr = state.lr;
  for (std::size_t t = 0; t < prefs.size(); ++t) {
    Matrix& theta = *prefs[t].tensor;
    const Matrix& grad = *grefs[t].tensor;
    Matrix& eg2 = *erefs[t].tensor;
    Matrix& ex2 = *xrefs[t].tensor;
    if (!theta.same_shape(grad) || !theta.same_shape(eg2) || !theta.same_shape(ex2)) {
      throw ShapeError("adadelta_update: shape mismatch on " + prefs[t].name);
    }
    double* pd = theta.data();
    const double* gd = grad.data();
    double* ed = eg2.data();
    double* xd = ex2.data();
    const std::size_t n = theta.size();
    for (std::size_t i = 0; i < n; ++i) {
      const double g = gd[i];
      ed[i] = rho * ed[i] + (1.0 - rho) * g * g;
      const double delta = -(std::sqrt(xd[i] + eps) / std::sqrt(ed[i] + eps)) * g;
      xd[i] = rho * xd[i] + (1.0 - rho) * delta * delta;
      pd[i] += lr * delta;
    }
  }
}

}  // namespace b2dcnn
