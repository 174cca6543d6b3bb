#include "b2dcnn/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "b2dcnn/optimizer.hpp"

namespace b2dcnn {

namespace {

// Forward trace over x (already in processing order) from a zero state.
LstmTrace lstm_trace(const Matrix& x, const LSTMParams& p) {
  const int l = x.rows();
  const int h = p.hidden;
  LstmTrace tr{Matrix(l, 4 * h), Matrix(l, h), Matrix(l, h), Matrix(l, h)};
  Vec z(static_cast<std::size_t>(h + p.input));
  Vec prev_h(static_cast<std::size_t>(h), 0.0);
  Vec prev_c(static_cast<std::size_t>(h), 0.0);
  for (int t = 0; t < l; ++t) {
    std::copy(prev_h.begin(), prev_h.end(), z.begin());
    const double* xr = x.row_data(t);
    std::copy(xr, xr + p.input, z.begin() + h);
    Vec a = matvec(p.W, z);
    const double* bias = p.b.row_data(0);
    double* g = tr.gates.row_data(t);
    for (int i = 0; i < 4 * h; ++i) a[static_cast<std::size_t>(i)] += bias[i];
    for (int i = 0; i < h; ++i) {
      g[i] = sigmoid(a[static_cast<std::size_t>(i)]);
      g[h + i] = sigmoid(a[static_cast<std::size_t>(h + i)]);
      g[2 * h + i] = sigmoid(a[static_cast<std::size_t>(2 * h + i)]);
      g[3 * h + i] = std::tanh(a[static_cast<std::size_t>(3 * h + i)]);
    }
    double* cell = tr.cells.row_data(t);
    double* tc = tr.tanh_cells.row_data(t);
    double* hid = tr.hidden.row_data(t);
    for (int i = 0; i < h; ++i) {
      cell[i] = g[h + i] * prev_c[static_cast<std::size_t>(i)] + g[i] * g[3 * h + i];
      tc[i] = std::tanh(cell[i]);
      hid[i] = g[2 * h + i] * tc[i];
    }
    prev_c.assign(cell, cell + h);
    prev_h.assign(hid, hid + h);
  }
  return tr;
}

// Backpropagation through time over one direction. x and the trace are in
// processing order; d_hidden is the gradient arriving at each hidden output
// row. Accumulates into dW/db and returns dX (processing order).
Matrix lstm_backward(const Matrix& x, const LstmTrace& tr, const LSTMParams& p,
                     const Matrix& d_hidden, Matrix& dW, Matrix& db) {
  const int l = x.rows();
  const int h = p.hidden;
  const int din = p.input;
  Matrix dX(l, din);
  Vec dh_carry(static_cast<std::size_t>(h), 0.0);
  Vec dc_carry(static_cast<std::size_t>(h), 0.0);
  Vec da(static_cast<std::size_t>(4 * h));
  Vec z(static_cast<std::size_t>(h + din));
  for (int t = l - 1; t >= 0; --t) {
    const double* g = tr.gates.row_data(t);
    const double* tc = tr.tanh_cells.row_data(t);
    const double* dh_in = d_hidden.row_data(t);
    const double* c_prev = t > 0 ? tr.cells.row_data(t - 1) : nullptr;
    const double* h_prev = t > 0 ? tr.hidden.row_data(t - 1) : nullptr;
    for (int i = 0; i < h; ++i) {
      const double gi = g[i];
      const double gf = g[h + i];
      const double go = g[2 * h + i];
      const double gg = g[3 * h + i];
      const double dh = dh_in[i] + dh_carry[static_cast<std::size_t>(i)];
      const double do_ = dh * tc[i];
      const double dc = dc_carry[static_cast<std::size_t>(i)] + dh * go * (1.0 - tc[i] * tc[i]);
      const double cp = c_prev ? c_prev[i] : 0.0;
      const double di = dc * gg;
      const double df = dc * cp;
      const double dg = dc * gi;
      dc_carry[static_cast<std::size_t>(i)] = dc * gf;
      da[static_cast<std::size_t>(i)] = di * gi * (1.0 - gi);
      da[static_cast<std::size_t>(h + i)] = df * gf * (1.0 - gf);
      da[static_cast<std::size_t>(2 * h + i)] = do_ * go * (1.0 - go);
      da[static_cast<std::size_t>(3 * h + i)] = dg * (1.0 - gg * gg);
    }
    // z = [h_prev, x_t]
    if (h_prev) {
      std::copy(h_prev, h_prev + h, z.begin());
    } else {
      std::fill(z.begin(), z.begin() + h, 0.0);
    }
    const double* xr = x.row_data(t);
    std::copy(xr, xr + din, z.begin() + h);
    double* dbp = db.row_data(0);
    for (int r = 0; r < 4 * h; ++r) {
      const double dar = da[static_cast<std::size_t>(r)];
      dbp[r] += dar;
      double* dWr = dW.row_data(r);
      for (int cidx = 0; cidx < h + din; ++cidx) {
        dWr[cidx] += dar * z[static_cast<std::size_t>(cidx)];
      }
    }
    const Vec dz = matvec_transpose(p.W, da);
    std::copy(dz.begin(), dz.begin() + h, dh_carry.begin());
    std::copy(dz.begin() + h, dz.end(), dX.row_data(t));
  }
  return dX;
}

Matrix ones(int rows, int cols) { return Matrix(rows, cols, 1.0); }

void check_tokens(const std::vector<int>& tokens, const ModelParams& p) {
  if (tokens.empty()) {
    throw ShapeError("forward: empty token sequence");
  }
  const int min_len = min_sequence_length(p.variant, p.dims);
  const int limit = p.dims.seq_len > 0 ? p.dims.seq_len : static_cast<int>(tokens.size());
  if (static_cast<int>(tokens.size()) > std::max(limit, min_len)) {
    throw ShapeError("forward: sequence of length " + std::to_string(tokens.size()) +
                     " exceeds the model's fixed length " + std::to_string(limit));
  }
}

int padded_length(const std::vector<int>& tokens, const ModelParams& p) {
  const int min_len = min_sequence_length(p.variant, p.dims);
  int len = std::max(static_cast<int>(tokens.size()), min_len);
  if ((p.variant == Variant::BLSTM2DPool || p.variant == Variant::BLSTM2DCNN) &&
      p.dims.seq_len > 0) {
    len = p.dims.seq_len;  // the 2d variants need a fixed pooled length
  }
  return len;
}

}  // namespace

ForwardCache forward_cached(const std::vector<int>& tokens, int target, const ModelParams& p,
                            const DropoutRates& rates, DropoutMode mode, RandomSource& rng) {
  check_tokens(tokens, p);
  ForwardCache c;
  c.tokens = tokens;
  c.target = target;
  c.padded_len = padded_length(tokens, p);

  const Matrix looked_up = embed(tokens, p.embedding);
  c.x_embed = Matrix(c.padded_len, p.dims.d_w);
  for (int i = 0; i < looked_up.rows(); ++i) {
    std::copy(looked_up.row_data(i), looked_up.row_data(i) + p.dims.d_w, c.x_embed.row_data(i));
  }

  const bool train = mode == DropoutMode::Train;
  c.embed_mask = train ? dropout_mask(c.padded_len, p.dims.d_w, rates.embed, rng)
                       : ones(c.padded_len, p.dims.d_w);
  c.x_in = hadamard(c.x_embed, c.embed_mask);

  c.fwd = lstm_trace(c.x_in, p.lstm_fwd);
  c.bwd = lstm_trace(reverse_rows(c.x_in), p.lstm_bwd);
  c.h_sum = c.fwd.hidden;
  add_in_place(c.h_sum, reverse_rows(c.bwd.hidden));

  c.blstm_mask = train ? dropout_mask(c.padded_len, p.dims.hidden, rates.blstm, rng)
                       : ones(c.padded_len, p.dims.hidden);
  c.h_in = hadamard(c.h_sum, c.blstm_mask);

  switch (p.variant) {
    case Variant::BLSTM:
      c.penult = maxpool1d_time_argmax(c.h_in, &c.pool1d_rows);
      break;
    case Variant::BLSTMAtt: {
      c.att_tanh = Matrix(c.padded_len, p.dims.hidden);
      Vec scores(static_cast<std::size_t>(c.padded_len));
      const double* v = p.att.score.row_data(0);
      for (int i = 0; i < c.padded_len; ++i) {
        Vec u = matvec(p.att.projection, c.h_in.row_vec(i));
        double s = 0.0;
        for (int j = 0; j < p.dims.hidden; ++j) {
          const double tj = std::tanh(u[static_cast<std::size_t>(j)]);
          c.att_tanh(i, j) = tj;
          s += v[j] * tj;
        }
        scores[static_cast<std::size_t>(i)] = s;
      }
      c.att_alpha = softmax(scores);
      c.penult.assign(static_cast<std::size_t>(p.dims.hidden), 0.0);
      for (int i = 0; i < c.padded_len; ++i) {
        const double a = c.att_alpha[static_cast<std::size_t>(i)];
        const double* row = c.h_in.row_data(i);
        for (int j = 0; j < p.dims.hidden; ++j) {
          c.penult[static_cast<std::size_t>(j)] += a * row[j];
        }
      }
      break;
    }
    case Variant::BLSTM2DPool:
      c.penult = maxpool2d_argmax(c.h_in, p.dims.p1, p.dims.p2, &c.pool2d_argmax);
      break;
    case Variant::BLSTM2DCNN: {
      c.conv_maps = conv_layer(c.h_in, p.conv);
      c.conv_pool_argmax.resize(c.conv_maps.size());
      c.penult.clear();
      for (std::size_t f = 0; f < c.conv_maps.size(); ++f) {
        Vec pooled =
            maxpool2d_argmax(c.conv_maps[f], p.dims.p1, p.dims.p2, &c.conv_pool_argmax[f]);
        c.penult.insert(c.penult.end(), pooled.begin(), pooled.end());
      }
      break;
    }
  }

  const int plen = static_cast<int>(c.penult.size());
  c.penult_mask =
      train ? dropout_mask(1, plen, rates.penult, rng) : ones(1, plen);
  c.penult_in.resize(c.penult.size());
  const double* pm = c.penult_mask.row_data(0);
  for (std::size_t i = 0; i < c.penult.size(); ++i) c.penult_in[i] = c.penult[i] * pm[i];

  const Classification cls = softmax_classify(c.penult_in, p.out);
  c.probs = cls.probs;
  c.predicted = cls.label;
  return c;
}

Classification forward_eval(const std::vector<int>& tokens, const ModelParams& p) {
  RandomSource unused(0);
  const ForwardCache c = forward_cached(tokens, 0, p, DropoutRates{}, DropoutMode::Eval, unused);
  return Classification{c.probs, c.predicted};
}

GradientSet GradientSet::zeros_like(const ModelParams& p) {
  GradientSet g;
  g.t_ = make_params_shell(p.variant, p.dims);
  return g;
}

void GradientSet::clear() {
  auto refs = tensor_refs(t_);
  for (auto& r : refs) {
    if (r.name == "embedding") continue;
    r.tensor->fill(0.0);
  }
  for (int row : touched_) {
    double* p = t_.embedding.row_data(row);
    std::fill(p, p + t_.embedding.cols(), 0.0);
  }
  touched_.clear();
}

void GradientSet::add_scaled(const GradientSet& other, double s) {
  auto dst = tensor_refs(t_);
  auto src = tensor_refs(other.t_);
  if (dst.size() != src.size()) {
    throw ShapeError("GradientSet::add_scaled: tensor sets disagree");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name == "embedding") continue;
    if (!dst[i].tensor->same_shape(*src[i].tensor)) {
      throw ShapeError("GradientSet::add_scaled: shape mismatch on " + dst[i].name);
    }
    double* d = dst[i].tensor->data();
    const double* o = src[i].tensor->data();
    const std::size_t n = dst[i].tensor->size();
    for (std::size_t j = 0; j < n; ++j) d[j] += s * o[j];
  }
  const int cols = t_.embedding.cols();
  for (int row : other.touched_) {
    double* d = t_.embedding.row_data(row);
    const double* o = other.t_.embedding.row_data(row);
    for (int j = 0; j < cols; ++j) d[j] += s * o[j];
    touched_.push_back(row);
  }
}

void GradientSet::scale(double s) {
  auto refs = tensor_refs(t_);
  for (auto& r : refs) {
    if (r.name == "embedding") continue;
    double* d = r.tensor->data();
    for (std::size_t j = 0; j < r.tensor->size(); ++j) d[j] *= s;
  }
  // The touched list may name a row more than once; scale each row once.
  std::vector<int> rows = touched_;
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  for (int row : rows) {
    double* d = t_.embedding.row_data(row);
    for (int j = 0; j < t_.embedding.cols(); ++j) d[j] *= s;
  }
}

namespace {

void check_cache(const ForwardCache& cache, const ModelParams& p) {
  if (cache.h_sum.cols() != p.dims.hidden || cache.x_embed.cols() != p.dims.d_w ||
      static_cast<int>(cache.probs.size()) != p.dims.n_classes ||
      static_cast<int>(cache.penult.size()) != p.out.W.cols()) {
    throw ShapeError("backward: cache does not match params");
  }
  if (cache.target < 0 || cache.target >= p.dims.n_classes) {
    throw ShapeError("backward: target " + std::to_string(cache.target) + " out of range");
  }
}

}  // namespace

double backward_into(const ForwardCache& cache, const ModelParams& p, double lambda,
                     GradientSet& out, bool* loss_clamped) {
  check_cache(cache, p);
  ModelParams& g = out.tensors();
  const int h = p.dims.hidden;
  const int m = p.dims.n_classes;
  const int l = cache.padded_len;

  const double loss = cross_entropy_loss(cache.probs, cache.target, p, LossConfig{lambda},
                                         loss_clamped);

  // Softmax layer: d objective / d logit = (probs - onehot) / m.
  Vec dlogits(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    dlogits[static_cast<std::size_t>(j)] =
        (cache.probs[static_cast<std::size_t>(j)] - (j == cache.target ? 1.0 : 0.0)) / m;
  }
  const int plen = static_cast<int>(cache.penult.size());
  for (int j = 0; j < m; ++j) {
    const double dj = dlogits[static_cast<std::size_t>(j)];
    g.out.b(0, j) += dj;
    double* gw = g.out.W.row_data(j);
    for (int i = 0; i < plen; ++i) gw[i] += dj * cache.penult_in[static_cast<std::size_t>(i)];
  }
  Vec dpen_in = matvec_transpose(p.out.W, dlogits);
  // Penultimate dropout.
  Vec dpen(static_cast<std::size_t>(plen));
  const double* pmask = cache.penult_mask.row_data(0);
  for (int i = 0; i < plen; ++i) dpen[static_cast<std::size_t>(i)] = dpen_in[static_cast<std::size_t>(i)] * pmask[i];

  // Un-pool into the (dropped) BLSTM output.
  Matrix dh_in(l, h);
  switch (p.variant) {
    case Variant::BLSTM:
      for (int j = 0; j < h; ++j) {
        dh_in(cache.pool1d_rows[static_cast<std::size_t>(j)], j) += dpen[static_cast<std::size_t>(j)];
      }
      break;
    case Variant::BLSTMAtt: {
      // out = sum_i alpha_i h_i with alpha = softmax(score . tanh(P h_i)).
      Vec dalpha(static_cast<std::size_t>(l), 0.0);
      for (int i = 0; i < l; ++i) {
        const double* row = cache.h_in.row_data(i);
        double s = 0.0;
        for (int j = 0; j < h; ++j) s += dpen[static_cast<std::size_t>(j)] * row[j];
        dalpha[static_cast<std::size_t>(i)] = s;
        const double a = cache.att_alpha[static_cast<std::size_t>(i)];
        double* drow = dh_in.row_data(i);
        for (int j = 0; j < h; ++j) drow[j] += a * dpen[static_cast<std::size_t>(j)];
      }
      double dot = 0.0;
      for (int i = 0; i < l; ++i) {
        dot += cache.att_alpha[static_cast<std::size_t>(i)] * dalpha[static_cast<std::size_t>(i)];
      }
      const double* v = p.att.score.row_data(0);
      Vec du(static_cast<std::size_t>(h));
      for (int i = 0; i < l; ++i) {
        const double ds =
            cache.att_alpha[static_cast<std::size_t>(i)] * (dalpha[static_cast<std::size_t>(i)] - dot);
        const double* ti = cache.att_tanh.row_data(i);
        double* gv = g.att.score.row_data(0);
        for (int j = 0; j < h; ++j) {
          gv[j] += ds * ti[j];
          du[static_cast<std::size_t>(j)] = ds * v[j] * (1.0 - ti[j] * ti[j]);
        }
        const double* hrow = cache.h_in.row_data(i);
        for (int r = 0; r < h; ++r) {
          double* gp = g.att.projection.row_data(r);
          const double dur = du[static_cast<std::size_t>(r)];
          for (int cidx = 0; cidx < h; ++cidx) gp[cidx] += dur * hrow[cidx];
        }
        const Vec dh_att = matvec_transpose(p.att.projection, du);
        double* drow = dh_in.row_data(i);
        for (int j = 0; j < h; ++j) drow[j] += dh_att[static_cast<std::size_t>(j)];
      }
      break;
    }
    case Variant::BLSTM2DPool:
      for (std::size_t w = 0; w < cache.pool2d_argmax.size(); ++w) {
        const auto [r, cc] = cache.pool2d_argmax[w];
        dh_in(r, cc) += dpen[w];
      }
      break;
    case Variant::BLSTM2DCNN: {
      const int per_filter = plen / p.conv.n_filters();
      for (int f = 0; f < p.conv.n_filters(); ++f) {
        const Matrix& map = cache.conv_maps[static_cast<std::size_t>(f)];
        Matrix dmap(map.rows(), map.cols());
        for (int w = 0; w < per_filter; ++w) {
          const auto [r, cc] = cache.conv_pool_argmax[static_cast<std::size_t>(f)][static_cast<std::size_t>(w)];
          dmap(r, cc) += dpen[static_cast<std::size_t>(f * per_filter + w)];
        }
        // Through the activation to the pre-activation map.
        if (p.conv.act == Activation::Tanh) {
          for (int r = 0; r < dmap.rows(); ++r) {
            double* dr = dmap.row_data(r);
            const double* mr = map.row_data(r);
            for (int cc = 0; cc < dmap.cols(); ++cc) dr[cc] *= 1.0 - mr[cc] * mr[cc];
          }
        }
        const Matrix& filt = p.conv.filters[static_cast<std::size_t>(f)];
        Matrix& gfilt = g.conv.filters[static_cast<std::size_t>(f)];
        double gbias = 0.0;
        for (int i = 0; i < dmap.rows(); ++i) {
          for (int j = 0; j < dmap.cols(); ++j) {
            const double dij = dmap(i, j);
            if (dij == 0.0) continue;  // pooled-away positions
            gbias += dij;
            for (int a = 0; a < p.conv.k; ++a) {
              const double* hrow = cache.h_in.row_data(i + a) + j;
              double* grow = gfilt.row_data(a);
              const double* frow = filt.row_data(a);
              double* dhrow = dh_in.row_data(i + a) + j;
              for (int b = 0; b < p.conv.d; ++b) {
                grow[b] += dij * hrow[b];
                dhrow[b] += dij * frow[b];
              }
            }
          }
        }
        g.conv.biases(0, f) += gbias;
      }
      break;
    }
  }

  // BLSTM-output dropout.
  Matrix dh_sum = hadamard(dh_in, cache.blstm_mask);

  // Both directions receive the same upstream gradient (element-wise sum).
  Matrix dx = lstm_backward(cache.x_in, cache.fwd, p.lstm_fwd, dh_sum, g.lstm_fwd.W,
                            g.lstm_fwd.b);
  const Matrix x_rev = reverse_rows(cache.x_in);
  const Matrix dh_rev = reverse_rows(dh_sum);
  Matrix dx_bwd =
      lstm_backward(x_rev, cache.bwd, p.lstm_bwd, dh_rev, g.lstm_bwd.W, g.lstm_bwd.b);
  add_in_place(dx, reverse_rows(dx_bwd));

  // Embedding dropout, then scatter into the table rows actually looked up
  // (padding rows carry no gradient).
  const Matrix dx_embed = hadamard(dx, cache.embed_mask);
  for (std::size_t i = 0; i < cache.tokens.size(); ++i) {
    const int row = cache.tokens[i];
    double* dst = g.embedding.row_data(row);
    const double* src = dx_embed.row_data(static_cast<int>(i));
    for (int j = 0; j < p.dims.d_w; ++j) dst[j] += src[j];
    out.touched_embedding_rows().push_back(row);
  }

  // L2 term: d(lambda theta^2)/d theta = 2 lambda theta.
  if (lambda != 0.0) {
    auto grefs = tensor_refs(g);
    auto prefs = tensor_refs(p);
    for (std::size_t i = 0; i < grefs.size(); ++i) {
      if (!grefs[i].regularized) continue;
      double* gd = grefs[i].tensor->data();
      const double* pd = prefs[i].tensor->data();
      const std::size_t n = grefs[i].tensor->size();
      for (std::size_t j = 0; j < n; ++j) gd[j] += 2.0 * lambda * pd[j];
    }
  }
  return loss;
}

BackwardResult backward(const ForwardCache& cache, const ModelParams& p, double lambda) {
  BackwardResult res;
  res.grads = GradientSet::zeros_like(p);
  res.loss = backward_into(cache, p, lambda, res.grads, &res.loss_clamped);
  return res;
}

FiniteDiffReport finite_diff_check(const std::vector<int>& tokens, int target,
                                   const ModelParams& params, double lambda, double epsilon,
                                   int samples_per_tensor, std::uint64_t seed,
                                   bool corrupt_conv_grads) {
  RandomSource unused(0);
  auto objective = [&](const ModelParams& p) {
    const ForwardCache c =
        forward_cached(tokens, target, p, DropoutRates{}, DropoutMode::Eval, unused);
    return cross_entropy_loss(c.probs, target, p, LossConfig{lambda});
  };
  const double j0 = objective(params);
  if (objective(params) != j0) {
    throw Error("finite_diff_check: objective is not deterministic");
  }

  const ForwardCache cache =
      forward_cached(tokens, target, params, DropoutRates{}, DropoutMode::Eval, unused);
  BackwardResult analytic = backward(cache, params, lambda);
  if (corrupt_conv_grads) {
    for (auto& ref : tensor_refs(analytic.grads.tensors())) {
      if (ref.name.rfind("conv.filter", 0) == 0) {
        double* d = ref.tensor->data();
        for (std::size_t i = 0; i < ref.tensor->size(); ++i) d[i] = -d[i];
      }
    }
  }

  ModelParams work = params;
  auto work_refs = tensor_refs(work);
  auto grad_refs = tensor_refs(analytic.grads.tensors());
  RandomSource rng(seed);
  FiniteDiffReport report;
  for (std::size_t ti = 0; ti < work_refs.size(); ++ti) {
    Matrix& tensor = *work_refs[ti].tensor;
    const Matrix& grad = *grad_refs[ti].tensor;
    const std::size_t n = tensor.size();
    std::set<std::size_t> coords;
    if (n <= static_cast<std::size_t>(samples_per_tensor)) {
      for (std::size_t i = 0; i < n; ++i) coords.insert(i);
    } else {
      while (coords.size() < static_cast<std::size_t>(samples_per_tensor)) {
        coords.insert(rng.next_index(n));
      }
    }
    GroupReport gr;
    gr.group = work_refs[ti].name;
    for (std::size_t c : coords) {
      const double saved = tensor.data()[c];
      tensor.data()[c] = saved + epsilon;
      const double jp = objective(work);
      tensor.data()[c] = saved - epsilon;
      const double jm = objective(work);
      tensor.data()[c] = saved;
      const double numeric = (jp - jm) / (2.0 * epsilon);
      const double a = grad.data()[c];
      const double rel =
          std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      gr.max_rel_err = std::max(gr.max_rel_err, rel);
      ++gr.checked;
    }
    report.worst = std::max(report.worst, gr.max_rel_err);
    report.groups.push_back(std::move(gr));
  }
  return report;
}

}  // namespace b2dcnn
