#include "b2dcnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "b2dcnn/optimizer.hpp"

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace b2dcnn {

namespace {

// Seed stream tags.
constexpr std::uint64_t kStreamInit = 1;
constexpr std::uint64_t kStreamSplit = 2;
constexpr std::uint64_t kStreamShuffle = 3;
constexpr std::uint64_t kStreamDropout = 4;
constexpr std::uint64_t kStreamGradcheck = 5;

void set_thread_count(int threads) {
#if defined(_OPENMP)
  omp_set_num_threads(threads > 1 ? threads : 1);
#else
  (void)threads;
#endif
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.batch < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (cfg.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (cfg.lr <= 0.0) throw ConfigError("lr must be > 0");
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  if (cfg.max_len < 0) throw ConfigError("max-len must be >= 0");
  for (double rate : {cfg.dropout_embed, cfg.dropout_blstm, cfg.dropout_penult}) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw ConfigError("dropout rates must be in [0, 1)");
    }
  }
}

std::vector<int> encode_tokens(const std::vector<std::string>& tokens, const Vocabulary& vocab,
                               int max_len, int seq_len) {
  std::vector<int> out;
  std::size_t limit = tokens.size();
  if (max_len > 0) limit = std::min(limit, static_cast<std::size_t>(max_len));
  if (seq_len > 0) limit = std::min(limit, static_cast<std::size_t>(seq_len));
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) out.push_back(vocab.lookup(tokens[i]));
  return out;
}

struct EncodedExample {
  std::vector<int> tokens;
  int target = 0;
};

std::vector<EncodedExample> encode_all(const std::vector<LabeledExample>& examples,
                                       const Vocabulary& vocab, int max_len, int seq_len) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    out.push_back({encode_tokens(ex.tokens, vocab, max_len, seq_len), ex.label});
  }
  return out;
}

std::vector<int> eval_predictions(const ModelParams& params,
                                  const std::vector<EncodedExample>& examples,
                                  std::vector<double>* confidence = nullptr) {
  std::vector<int> pred(examples.size(), 0);
  if (confidence) confidence->assign(examples.size(), 0.0);
  const auto n = static_cast<long long>(examples.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    const Classification cls = forward_eval(examples[static_cast<std::size_t>(i)].tokens, params);
    pred[static_cast<std::size_t>(i)] = cls.label;
    if (confidence) {
      (*confidence)[static_cast<std::size_t>(i)] =
          cls.probs[static_cast<std::size_t>(cls.label)];
    }
  }
  return pred;
}

double eval_metric(const ModelParams& params, const std::vector<EncodedExample>& examples,
                   Metric metric, int n_classes) {
  std::vector<int> gold;
  gold.reserve(examples.size());
  for (const auto& ex : examples) gold.push_back(ex.target);
  return metric_score(metric, gold, eval_predictions(params, examples), n_classes);
}

RunConfig snapshot_config(const RunConfig& cfg) {
  RunConfig snap = cfg;
  snap.train_path.clear();
  snap.dev_path.clear();
  snap.test_path.clear();
  snap.embeddings_path.clear();
  snap.checkpoint_path.clear();
  snap.threads = 1;
  return snap;
}

}  // namespace

std::string format_epoch_record(const EpochRecord& rec) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%d\t%.6f\t%.6f", rec.epoch, rec.train_loss, rec.dev_metric);
  return buf;
}

TrainOutput train_on(const RunConfig& cfg, const std::vector<LabeledExample>& train_set,
                     const std::vector<LabeledExample>& dev_set,
                     const std::vector<std::string>& label_names, std::ostream* progress) {
  validate_run_config(cfg);
  if (train_set.empty()) throw DataError("train: empty training set");
  if (dev_set.empty()) throw DataError("train: empty development set");
  if (label_names.size() < 2) throw DataError("train: need at least two classes");
  set_thread_count(cfg.threads);

  const Vocabulary vocab = build_vocab(train_set);

  ModelDims dims;
  dims.vocab = vocab.size();
  dims.d_w = cfg.embed_dim;
  dims.hidden = cfg.hidden;
  dims.n_classes = static_cast<int>(label_names.size());
  dims.n_filters = cfg.n_filters;
  dims.k = cfg.filter_k;
  dims.d = cfg.filter_d;
  dims.p1 = cfg.pool_p1;
  dims.p2 = cfg.pool_p2;

  // The 2d variants pool a fixed-size grid, so every sequence is padded (or
  // truncated) to one model-wide length: long enough for the longest train
  // sentence and for the filter/pool minimum.
  if (cfg.variant == Variant::BLSTM2DPool || cfg.variant == Variant::BLSTM2DCNN) {
    std::size_t longest = 1;
    for (const auto& ex : train_set) {
      std::size_t len = ex.tokens.size();
      if (cfg.max_len > 0) len = std::min(len, static_cast<std::size_t>(cfg.max_len));
      longest = std::max(longest, len);
    }
    dims.seq_len =
        std::max(static_cast<int>(longest), min_sequence_length(cfg.variant, dims));
  }

  RandomSource init_rng(derive_seed(cfg.seed, kStreamInit));
  ModelParams params = [&] {
    if (!cfg.embeddings_path.empty()) {
      PretrainedResult pre = load_pretrained(cfg.embeddings_path, vocab, cfg.embed_dim, init_rng);
      if (progress) {
        *progress << "# embeddings: " << pre.covered << "/" << vocab.size()
                  << " tokens covered\n";
      }
      return init_params_with_embedding(cfg.variant, dims, std::move(pre.table), init_rng);
    }
    return init_params(cfg.variant, dims, init_rng);
  }();

  const auto train_enc = encode_all(train_set, vocab, cfg.max_len, dims.seq_len);
  const auto dev_enc = encode_all(dev_set, vocab, cfg.max_len, dims.seq_len);

  AdaDeltaState state = AdaDeltaState::zeros_like(params, 0.95, 1e-6, cfg.lr);
  const DropoutRates rates{cfg.dropout_embed, cfg.dropout_blstm, cfg.dropout_penult};

  TrainOutput out;
  ModelParams best_params = params;
  double best_metric = -1.0;
  int best_epoch = 0;

  std::vector<GradientSet> slot_grads(static_cast<std::size_t>(cfg.batch));
  for (auto& g : slot_grads) g = GradientSet::zeros_like(params);
  GradientSet batch_grad = GradientSet::zeros_like(params);
  std::vector<double> slot_loss(static_cast<std::size_t>(cfg.batch), 0.0);
  std::vector<int> slot_clamp(static_cast<std::size_t>(cfg.batch), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches =
        minibatches(train_enc.size(), cfg.batch, derive_seed(cfg.seed, kStreamShuffle,
                                                             static_cast<std::uint64_t>(epoch)));
    double loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const auto& batch = batches[bi];
      const auto bsz = static_cast<long long>(batch.size());
      // Per-example work is independent: dropout draws are keyed by
      // (seed, epoch, batch, slot), so the worker pool computes exactly what
      // the serial loop would.
#pragma omp parallel for schedule(static)
      for (long long s = 0; s < bsz; ++s) {
        const auto slot = static_cast<std::size_t>(s);
        const EncodedExample& ex = train_enc[batch[slot]];
        RandomSource drop_rng(derive_seed(derive_seed(cfg.seed, kStreamDropout,
                                                      static_cast<std::uint64_t>(epoch)),
                                          bi, slot));
        const ForwardCache cache =
            forward_cached(ex.tokens, ex.target, params, rates, DropoutMode::Train, drop_rng);
        slot_grads[slot].clear();
        bool clamped = false;
        slot_loss[slot] = backward_into(cache, params, cfg.lambda, slot_grads[slot], &clamped);
        slot_clamp[slot] = clamped ? 1 : 0;
      }
      // Ordered reduction by slot index keeps results bitwise identical to
      // the single-threaded run.
      batch_grad.clear();
      const double inv = 1.0 / static_cast<double>(batch.size());
      for (std::size_t s = 0; s < batch.size(); ++s) {
        batch_grad.add_scaled(slot_grads[s], inv);
        loss_sum += slot_loss[s];
        out.clamp_events += slot_clamp[s];
      }
      adadelta_update(params, batch_grad, state);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train_enc.size());
    rec.dev_metric = eval_metric(params, dev_enc, cfg.metric, dims.n_classes);
    out.log.push_back(rec);
    if (progress) {
      *progress << format_epoch_record(rec) << "\n";
      progress->flush();
    }
    if (rec.dev_metric > best_metric) {
      best_metric = rec.dev_metric;
      best_epoch = epoch;
      best_params = params;
    }
  }

  out.best_epoch = best_epoch;
  out.best_metric = std::max(best_metric, 0.0);
  out.best = Checkpoint{snapshot_config(cfg), label_names, vocab.tokens(),
                        std::move(best_params)};
  return out;
}

TrainOutput train(const RunConfig& cfg, std::ostream* progress) {
  if (cfg.train_path.empty()) {
    throw ConfigError("train: no training corpus configured");
  }
  ParsedDataset train_ds = parse_dataset(cfg.train_path, cfg.lowercase);
  std::vector<LabeledExample> train_set;
  std::vector<LabeledExample> dev_set;
  if (!cfg.dev_path.empty()) {
    train_set = std::move(train_ds.examples);
    dev_set = assign_labels(parse_labeled_lines(cfg.dev_path, cfg.lowercase),
                            train_ds.label_names, "dev corpus " + cfg.dev_path);
  } else {
    RandomSource split_rng(derive_seed(cfg.seed, kStreamSplit));
    DatasetSplit split = make_dev_split(train_ds.examples, cfg.dev_fraction, split_rng);
    train_set = std::move(split.train);
    dev_set = std::move(split.dev);
  }
  return train_on(cfg, train_set, dev_set, train_ds.label_names, progress);
}

CvOutput run_cv(const RunConfig& cfg, std::ostream* progress) {
  if (cfg.cv < 2) throw ConfigError("run_cv: cv fold count must be >= 2");
  if (cfg.train_path.empty()) throw ConfigError("run_cv: no training corpus configured");
  ParsedDataset ds = parse_dataset(cfg.train_path, cfg.lowercase);
  RandomSource split_rng(derive_seed(cfg.seed, kStreamSplit));
  const auto folds = make_cv_splits(ds.examples, cfg.cv, split_rng);
  CvOutput out;
  for (const auto& fold : folds) {
    RandomSource dev_rng(derive_seed(cfg.seed, kStreamSplit,
                                     static_cast<std::uint64_t>(fold.fold_id) + 1));
    DatasetSplit inner = make_dev_split(fold.train, cfg.dev_fraction, dev_rng);
    TrainOutput trained = train_on(cfg, inner.train, inner.dev, ds.label_names, nullptr);
    const EvalOutput scored = evaluate(trained.best, fold.test, cfg.metric);
    out.fold_scores.push_back(scored.score);
    if (progress) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "fold\t%d\t%.6f", fold.fold_id, scored.score);
      *progress << buf << "\n";
      progress->flush();
    }
  }
  double sum = 0.0;
  for (double s : out.fold_scores) sum += s;
  out.mean = sum / static_cast<double>(out.fold_scores.size());
  double ss = 0.0;
  for (double s : out.fold_scores) ss += (s - out.mean) * (s - out.mean);
  out.stddev = out.fold_scores.size() > 1
                   ? std::sqrt(ss / static_cast<double>(out.fold_scores.size() - 1))
                   : 0.0;
  return out;
}

EvalOutput evaluate(const Checkpoint& ck, const std::vector<LabeledExample>& test,
                    Metric metric) {
  if (test.empty()) throw DataError("evaluate: empty test set");
  const Vocabulary vocab = Vocabulary::from_tokens(ck.vocab_tokens);
  const auto enc =
      encode_all(test, vocab, ck.config.max_len, ck.params.dims.seq_len);
  EvalOutput out;
  for (const auto& ex : enc) out.gold.push_back(ex.target);
  out.predictions = eval_predictions(ck.params, enc, &out.confidence);
  out.score = metric_score(metric, out.gold, out.predictions, ck.params.dims.n_classes);
  return out;
}

EvalOutput evaluate_file(const Checkpoint& ck, const std::string& path, Metric metric) {
  const auto raw = parse_labeled_lines(path, ck.config.lowercase);
  return evaluate(ck, assign_labels(raw, ck.label_names, "test corpus " + path), metric);
}

std::vector<Prediction> predict_file(const Checkpoint& ck, const std::string& path) {
  const auto raw = parse_labeled_lines(path, ck.config.lowercase);
  const Vocabulary vocab = Vocabulary::from_tokens(ck.vocab_tokens);
  std::vector<EncodedExample> enc;
  enc.reserve(raw.size());
  for (const auto& r : raw) {
    enc.push_back({encode_tokens(r.tokens, vocab, ck.config.max_len, ck.params.dims.seq_len), 0});
  }
  std::vector<double> confidence;
  const auto pred = eval_predictions(ck.params, enc, &confidence);
  std::vector<Prediction> out(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out[i] = Prediction{pred[i], confidence[i]};
  }
  return out;
}

std::vector<LengthBucket> analyze_length(const std::vector<Checkpoint>& runs,
                                         const std::vector<RawExample>& test_raw, int window) {
  if (runs.empty()) throw ConfigError("analyze_length: need at least one checkpoint");
  if (window < 0) throw ConfigError("analyze_length: window must be >= 0");
  if (test_raw.empty()) throw DataError("analyze_length: empty test set");

  const int width = 2 * window + 1;
  // correct[r][i]: whether run r classified example i correctly.
  std::vector<std::vector<bool>> correct;
  for (const auto& ck : runs) {
    const auto examples = assign_labels(test_raw, ck.label_names, "test corpus");
    const EvalOutput ev = evaluate(ck, examples, Metric::Accuracy);
    std::vector<bool> ok(ev.predictions.size());
    for (std::size_t i = 0; i < ok.size(); ++i) ok[i] = ev.predictions[i] == ev.gold[i];
    correct.push_back(std::move(ok));
  }

  int max_bucket = 0;
  std::vector<int> bucket_of(test_raw.size());
  for (std::size_t i = 0; i < test_raw.size(); ++i) {
    const int len = static_cast<int>(test_raw[i].tokens.size());
    bucket_of[i] = (len - 1) / width;
    max_bucket = std::max(max_bucket, bucket_of[i]);
  }

  std::vector<LengthBucket> buckets;
  for (int b = 0; b <= max_bucket; ++b) {
    LengthBucket bucket;
    bucket.center = b * width + window + 1;
    for (std::size_t i = 0; i < test_raw.size(); ++i) {
      if (bucket_of[i] == b) ++bucket.count;
    }
    if (bucket.count == 0) continue;  // empty windows are omitted
    double mean = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      int ok = 0;
      for (std::size_t i = 0; i < test_raw.size(); ++i) {
        if (bucket_of[i] == b && correct[r][i]) ++ok;
      }
      const double acc = static_cast<double>(ok) / static_cast<double>(bucket.count);
      bucket.per_run.push_back(acc);
      mean += acc;
    }
    bucket.mean_accuracy = mean / static_cast<double>(runs.size());
    buckets.push_back(std::move(bucket));
  }
  return buckets;
}

std::vector<LengthBucket> analyze_length_file(const std::vector<Checkpoint>& runs,
                                              const std::string& path, int window) {
  if (runs.empty()) throw ConfigError("analyze_length: need at least one checkpoint");
  return analyze_length(runs, parse_labeled_lines(path, runs.front().config.lowercase), window);
}

std::vector<SweepCell> sweep(const RunConfig& base, const std::vector<int>& sizes,
                             std::ostream* progress) {
  if (sizes.empty()) throw ConfigError("sweep: empty size list");
  if (base.train_path.empty()) throw ConfigError("sweep: no training corpus configured");
  ParsedDataset ds = parse_dataset(base.train_path, base.lowercase);
  RandomSource split_rng(derive_seed(base.seed, kStreamSplit));
  DatasetSplit split = make_dev_split(ds.examples, base.dev_fraction, split_rng);

  std::vector<SweepCell> cells;
  for (int c : sizes) {
    for (int p : sizes) {
      SweepCell cell;
      cell.filter = c;
      cell.pool = p;
      RunConfig cfg = base;
      cfg.filter_k = c;
      cfg.filter_d = c;
      cfg.pool_p1 = p;
      cfg.pool_p2 = p;
      try {
        TrainOutput trained = train_on(cfg, split.train, split.dev, ds.label_names, nullptr);
        cell.feasible = true;
        cell.dev_metric = trained.best_metric;
      } catch (const ConfigError&) {
        cell.feasible = false;  // reported as skipped, not fatal
      }
      if (progress) {
        char buf[96];
        if (cell.feasible) {
          std::snprintf(buf, sizeof(buf), "%d\t%d\t%.6f", c, p, cell.dev_metric);
        } else {
          std::snprintf(buf, sizeof(buf), "%d\t%d\tskipped", c, p);
        }
        *progress << buf << "\n";
        progress->flush();
      }
      cells.push_back(cell);
    }
  }
  return cells;
}

std::vector<GradcheckOutcome> run_gradcheck(const RunConfig& cfg,
                                            const std::vector<Variant>& variants, int length,
                                            double epsilon, int samples, bool corrupt_conv) {
  if (cfg.hidden > 16) {
    throw ConfigError("gradcheck: hidden must be <= 16, got " + std::to_string(cfg.hidden));
  }
  if (length < 1 || length > 12) {
    throw ConfigError("gradcheck: sequence length must be in [1, 12], got " +
                      std::to_string(length));
  }
  if (cfg.embed_dim > 16) {
    throw ConfigError("gradcheck: embed-dim must be <= 16, got " + std::to_string(cfg.embed_dim));
  }

  std::vector<GradcheckOutcome> outcomes;
  for (Variant v : variants) {
    ModelDims dims;
    dims.vocab = 12;
    dims.d_w = cfg.embed_dim;
    dims.hidden = cfg.hidden;
    dims.n_classes = 3;
    dims.n_filters = cfg.n_filters;
    dims.k = cfg.filter_k;
    dims.d = cfg.filter_d;
    dims.p1 = cfg.pool_p1;
    dims.p2 = cfg.pool_p2;
    if (v == Variant::BLSTM2DPool || v == Variant::BLSTM2DCNN) {
      dims.seq_len = std::max(length, min_sequence_length(v, dims));
    }
    RandomSource rng(derive_seed(cfg.seed, kStreamGradcheck, static_cast<std::uint64_t>(v)));
    ModelParams params = init_params(v, dims, rng);
    std::vector<int> tokens(static_cast<std::size_t>(length));
    for (auto& t : tokens) t = 1 + static_cast<int>(rng.next_index(static_cast<std::size_t>(dims.vocab - 1)));
    const int target = static_cast<int>(rng.next_index(static_cast<std::size_t>(dims.n_classes)));
    GradcheckOutcome outcome{
        v, finite_diff_check(tokens, target, params, cfg.lambda, epsilon, samples,
                             derive_seed(cfg.seed, kStreamGradcheck, 99), corrupt_conv)};
    outcomes.push_back(std::move(outcome));
  }
  return outcomes;
}

}  // namespace b2dcnn
