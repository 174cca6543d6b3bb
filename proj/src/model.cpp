#include "b2dcnn/model.hpp"

namespace b2dcnn {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::BLSTM: return "blstm";
    case Variant::BLSTMAtt: return "blstm-att";
    case Variant::BLSTM2DPool: return "blstm-2dpool";
    case Variant::BLSTM2DCNN: return "blstm-2dcnn";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "blstm") return Variant::BLSTM;
  if (s == "blstm-att") return Variant::BLSTMAtt;
  if (s == "blstm-2dpool") return Variant::BLSTM2DPool;
  if (s == "blstm-2dcnn") return Variant::BLSTM2DCNN;
  throw ConfigError("unknown model variant '" + s +
                    "' (expected blstm | blstm-att | blstm-2dpool | blstm-2dcnn)");
}

int pooled_length(Variant v, const ModelDims& dims) {
  switch (v) {
    case Variant::BLSTM:
    case Variant::BLSTMAtt:
      return dims.hidden;
    case Variant::BLSTM2DPool:
      return (dims.seq_len / dims.p1) * (dims.hidden / dims.p2);
    case Variant::BLSTM2DCNN:
      return dims.n_filters * ((dims.seq_len - dims.k + 1) / dims.p1) *
             ((dims.hidden - dims.d + 1) / dims.p2);
  }
  return 0;
}

int min_sequence_length(Variant v, const ModelDims& dims) {
  switch (v) {
    case Variant::BLSTM:
    case Variant::BLSTMAtt:
      return 1;
    case Variant::BLSTM2DPool:
      return dims.p1;
    case Variant::BLSTM2DCNN:
      // Narrow convolution needs k rows and the pooled map at least p1 rows.
      return dims.k + dims.p1 - 1;
  }
  return 1;
}

namespace {

LSTMParams lstm_shell(int hidden, int input) {
  LSTMParams p;
  p.hidden = hidden;
  p.input = input;
  p.W = Matrix(4 * hidden, hidden + input);
  p.b = Matrix(1, 4 * hidden);
  return p;
}

void set_forget_bias(LSTMParams& p, double value) {
  for (int i = 0; i < p.hidden; ++i) {
    p.b(0, p.hidden + i) = value;
  }
}

}  // namespace

namespace {

// Static feasibility checks; every violation here is a configuration error
// detectable before any training work starts.
void check_dims(Variant v, const ModelDims& dims) {
  if (dims.vocab < 1 || dims.d_w < 1 || dims.hidden < 1 || dims.n_classes < 2) {
    throw ConfigError("model dims: need vocab >= 1, d_w >= 1, hidden >= 1, classes >= 2");
  }
  if (v == Variant::BLSTM2DPool) {
    if (dims.p1 < 1 || dims.p2 < 1) throw ConfigError("pool sizes must be positive");
    if (dims.p2 > dims.hidden) {
      throw ConfigError("pool width " + std::to_string(dims.p2) +
                        " exceeds feature dimension " + std::to_string(dims.hidden));
    }
    if (dims.seq_len < dims.p1) {
      throw ConfigError("sequence length " + std::to_string(dims.seq_len) +
                        " shorter than pool height " + std::to_string(dims.p1));
    }
  }
  if (v == Variant::BLSTM2DCNN) {
    if (dims.n_filters < 1 || dims.k < 1 || dims.d < 1 || dims.p1 < 1 || dims.p2 < 1) {
      throw ConfigError("filter/pool sizes must be positive");
    }
    if (dims.d > dims.hidden) {
      throw ConfigError("filter width " + std::to_string(dims.d) +
                        " exceeds feature dimension " + std::to_string(dims.hidden));
    }
    if (dims.p2 > dims.hidden - dims.d + 1) {
      throw ConfigError("pool width " + std::to_string(dims.p2) + " exceeds feature-map width " +
                        std::to_string(dims.hidden - dims.d + 1));
    }
    if (dims.seq_len < dims.k + dims.p1 - 1) {
      throw ConfigError("sequence length " + std::to_string(dims.seq_len) +
                        " shorter than filter+pool minimum " +
                        std::to_string(dims.k + dims.p1 - 1));
    }
  }
}

}  // namespace

ModelParams make_params_shell(Variant v, const ModelDims& dims) {
  check_dims(v, dims);
  ModelParams p;
  p.variant = v;
  p.dims = dims;
  p.embedding = Matrix(dims.vocab, dims.d_w);
  p.lstm_fwd = lstm_shell(dims.hidden, dims.d_w);
  p.lstm_bwd = lstm_shell(dims.hidden, dims.d_w);
  if (v == Variant::BLSTM2DCNN) {
    p.conv.k = dims.k;
    p.conv.d = dims.d;
    p.conv.act = Activation::Tanh;
    p.conv.filters.assign(static_cast<std::size_t>(dims.n_filters), Matrix(dims.k, dims.d));
    p.conv.biases = Matrix(1, dims.n_filters);
  }
  if (v == Variant::BLSTMAtt) {
    p.att.projection = Matrix(dims.hidden, dims.hidden);
    p.att.score = Matrix(1, dims.hidden);
  }
  p.out.W = Matrix(dims.n_classes, pooled_length(v, dims));
  p.out.b = Matrix(1, dims.n_classes);
  return p;
}

ModelParams init_params(Variant v, const ModelDims& dims, RandomSource& rng) {
  Matrix embedding = uniform_init(dims.vocab, dims.d_w, -0.1, 0.1, rng);
  return init_params_with_embedding(v, dims, std::move(embedding), rng);
}

ModelParams init_params_with_embedding(Variant v, const ModelDims& dims, Matrix embedding,
                                       RandomSource& rng) {
  ModelParams p = make_params_shell(v, dims);
  if (!embedding.same_shape(p.embedding)) {
    throw ShapeError("init_params: embedding " + embedding.shape_str() + " does not match " +
                     p.embedding.shape_str());
  }
  p.embedding = std::move(embedding);
  p.lstm_fwd.W = uniform_init(4 * dims.hidden, dims.hidden + dims.d_w, -0.1, 0.1, rng);
  set_forget_bias(p.lstm_fwd, 1.0);
  p.lstm_bwd.W = uniform_init(4 * dims.hidden, dims.hidden + dims.d_w, -0.1, 0.1, rng);
  set_forget_bias(p.lstm_bwd, 1.0);
  if (v == Variant::BLSTM2DCNN) {
    for (auto& f : p.conv.filters) {
      f = uniform_init(dims.k, dims.d, -0.1, 0.1, rng);
    }
  }
  if (v == Variant::BLSTMAtt) {
    p.att.projection = uniform_init(dims.hidden, dims.hidden, -0.1, 0.1, rng);
    p.att.score = uniform_init(1, dims.hidden, -0.1, 0.1, rng);
  }
  p.out.W = uniform_init(dims.n_classes, pooled_length(v, dims), -0.1, 0.1, rng);
  return p;
}

namespace {

template <class Ref, class Params>
std::vector<Ref> collect_refs(Params& p) {
  std::vector<Ref> refs;
  refs.push_back({"embedding", &p.embedding, false});
  refs.push_back({"lstm_fwd.W", &p.lstm_fwd.W, true});
  refs.push_back({"lstm_fwd.b", &p.lstm_fwd.b, false});
  refs.push_back({"lstm_bwd.W", &p.lstm_bwd.W, true});
  refs.push_back({"lstm_bwd.b", &p.lstm_bwd.b, false});
  if (p.variant == Variant::BLSTM2DCNN) {
    for (std::size_t f = 0; f < p.conv.filters.size(); ++f) {
      refs.push_back({"conv.filter" + std::to_string(f), &p.conv.filters[f], true});
    }
    refs.push_back({"conv.bias", &p.conv.biases, false});
  }
  if (p.variant == Variant::BLSTMAtt) {
    refs.push_back({"attention.projection", &p.att.projection, true});
    refs.push_back({"attention.score", &p.att.score, true});
  }
  refs.push_back({"softmax.W", &p.out.W, true});
  refs.push_back({"softmax.b", &p.out.b, false});
  return refs;
}

}  // namespace

std::vector<TensorRef> tensor_refs(ModelParams& p) { return collect_refs<TensorRef>(p); }

std::vector<ConstTensorRef> tensor_refs(const ModelParams& p) {
  return collect_refs<ConstTensorRef>(p);
}

}  // namespace b2dcnn
