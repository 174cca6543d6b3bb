#pragma once

#include <string>
#include <vector>

#include "b2dcnn/layers.hpp"

namespace b2dcnn {

enum class Variant { BLSTM, BLSTMAtt, BLSTM2DPool, BLSTM2DCNN };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct ModelDims {
  int vocab = 0;      // rows of the embedding table, including the unknown token
  int d_w = 0;        // embedding size
  int hidden = 0;     // LSTM hidden units per direction
  int n_classes = 0;
  int n_filters = 0;  // 2dcnn only
  int k = 0;          // filter height (words)
  int d = 0;          // filter width (features)
  int p1 = 0;         // pool height
  int p2 = 0;         // pool width
  int seq_len = 0;    // fixed padded length for the 2d variants; 0 = natural lengths
};

// Every trainable tensor of one model variant. Tensors not used by the
// variant are left empty.
struct ModelParams {
  Variant variant = Variant::BLSTM2DCNN;
  ModelDims dims;
  Matrix embedding;  // vocab x d_w, fine-tuned during training
  LSTMParams lstm_fwd;
  LSTMParams lstm_bwd;
  ConvParams conv;
  AttentionParams att;
  SoftmaxParams out;
};

// Length of the pooled vector h* that feeds the classifier.
int pooled_length(Variant v, const ModelDims& dims);

// Shortest sequence the variant can process; shorter inputs are padded with
// all-zero embedding rows before the BLSTM.
int min_sequence_length(Variant v, const ModelDims& dims);

// Zero-valued tensors of the right shapes for the variant.
ModelParams make_params_shell(Variant v, const ModelDims& dims);

// Uniform [-0.1, 0.1] weights, zero biases except the forget-gate block
// (initialized to 1.0 for gradient flow early in training). The embedding
// table is drawn first so pretrained rows can be written over it without
// disturbing the rest of the draw sequence.
ModelParams init_params(Variant v, const ModelDims& dims, RandomSource& rng);
ModelParams init_params_with_embedding(Variant v, const ModelDims& dims, Matrix embedding,
                                       RandomSource& rng);

struct TensorRef {
  std::string name;
  Matrix* tensor;
  bool regularized;  // whether the tensor enters the L2 penalty
};

struct ConstTensorRef {
  std::string name;
  const Matrix* tensor;
  bool regularized;
};

// Canonical tensor enumeration: fixed order shared by checkpoints, the
// optimizer state, and gradient-check reports.
std::vector<TensorRef> tensor_refs(ModelParams& p);
std::vector<ConstTensorRef> tensor_refs(const ModelParams& p);

}  // namespace b2dcnn
