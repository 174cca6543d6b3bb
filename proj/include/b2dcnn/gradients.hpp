#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "b2dcnn/model.hpp"

namespace b2dcnn {

// Per-direction activations recorded by the forward pass, in processing
// order (the backward direction stores its trace over the reversed input).
struct LstmTrace {
  Matrix gates;       // l x 4h, post-activation [i f o g]
  Matrix cells;       // l x h
  Matrix tanh_cells;  // l x h
  Matrix hidden;      // l x h
};

// Everything one forward pass must remember for one backward pass.
// Produced by exactly one forward pass; value semantics, so reuse is safe
// but pointless.
struct ForwardCache {
  std::vector<int> tokens;  // token indices actually embedded (pre-padding)
  int padded_len = 0;       // rows fed to the BLSTM after zero-row padding
  Matrix x_embed;           // padded_len x d_w
  Matrix embed_mask;        // dropout mask over x_embed (all-ones in eval)
  Matrix x_in;              // x_embed * embed_mask
  LstmTrace fwd;
  LstmTrace bwd;            // over reverse_rows(x_in)
  Matrix h_sum;             // combined BLSTM output, padded_len x h
  Matrix blstm_mask;
  Matrix h_in;              // h_sum * blstm_mask
  // Variant-specific pooling records.
  std::vector<int> pool1d_rows;
  Matrix att_tanh;  // l x h, tanh(projection h_i)
  Vec att_alpha;
  std::vector<std::pair<int, int>> pool2d_argmax;
  std::vector<Matrix> conv_maps;  // post-activation feature maps
  std::vector<std::vector<std::pair<int, int>>> conv_pool_argmax;
  Vec penult;        // pooled vector before the penultimate dropout
  Matrix penult_mask;  // 1 x len(penult)
  Vec penult_in;
  Vec probs;
  int predicted = 0;
  int target = 0;
};

struct DropoutRates {
  double embed = 0.0;
  double blstm = 0.0;
  double penult = 0.0;
};

// Full forward pass with caching. Pads the embedded sequence with zero rows
// to the variant's minimum length (to seq_len for the 2d variants). In eval
// mode all dropout masks are ones and rng is not consumed.
ForwardCache forward_cached(const std::vector<int>& tokens, int target, const ModelParams& p,
                            const DropoutRates& rates, DropoutMode mode, RandomSource& rng);

// Inference-only forward pass (dropout off, nothing cached).
Classification forward_eval(const std::vector<int>& tokens, const ModelParams& p);

// Gradients for every trainable tensor, shape-matched to ModelParams. The
// embedding gradient is dense storage with sparse content: only rows of
// tokens seen by the contributing examples are nonzero, and those rows are
// tracked so scratch buffers can be cleared cheaply.
class GradientSet {
 public:
  GradientSet() = default;
  static GradientSet zeros_like(const ModelParams& p);

  ModelParams& tensors() { return t_; }
  const ModelParams& tensors() const { return t_; }
  std::vector<int>& touched_embedding_rows() { return touched_; }
  const std::vector<int>& touched_embedding_rows() const { return touched_; }

  // Zeroes all gradients; embedding rows are cleared via the touched list.
  void clear();
  // this += s * other.
  void add_scaled(const GradientSet& other, double s);
  void scale(double s);

 private:
  ModelParams t_;
  std::vector<int> touched_;
};

struct BackwardResult {
  double loss = 0.0;
  bool loss_clamped = false;
  GradientSet grads;
};

// Exact gradient of the per-example regularized cross-entropy objective with
// respect to every trainable parameter. Pooling routes gradient only to the
// cached argmax positions; dropout reuses the cached masks.
BackwardResult backward(const ForwardCache& cache, const ModelParams& p, double lambda);

// Accumulating flavor used by the mini-batch loop; `out` must be
// shape-matched (and is typically a cleared scratch buffer).
double backward_into(const ForwardCache& cache, const ModelParams& p, double lambda,
                     GradientSet& out, bool* loss_clamped = nullptr);

struct GroupReport {
  std::string group;
  double max_rel_err = 0.0;
  int checked = 0;
};

struct FiniteDiffReport {
  std::vector<GroupReport> groups;
  double worst = 0.0;

  bool pass(double threshold) const { return worst < threshold; }
};

// Central-difference verification of backward(). Samples up to
// samples_per_tensor coordinates per tensor and reports the max relative
// error |a - n| / max(1, |a|, |n|) per parameter group. Dropout is forced to
// eval mode so the objective is deterministic; if two evaluations of the
// unperturbed objective disagree, a determinism error is thrown.
// corrupt_conv_grads flips the sign of the analytic convolution-filter
// gradients; it exists so the failure path of the checker itself can be
// exercised.
FiniteDiffReport finite_diff_check(const std::vector<int>& tokens, int target,
                                   const ModelParams& params, double lambda,
                                   double epsilon = 1e-5, int samples_per_tensor = 20,
                                   std::uint64_t seed = 0x5eed, bool corrupt_conv_grads = false);

}  // namespace b2dcnn
