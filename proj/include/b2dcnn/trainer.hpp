#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "b2dcnn/checkpoint.hpp"
#include "b2dcnn/config.hpp"
#include "b2dcnn/data.hpp"
#include "b2dcnn/gradients.hpp"
#include "b2dcnn/metrics.hpp"

namespace b2dcnn {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double dev_metric = 0.0;
};

// One TSV line per epoch: "epoch<TAB>train-loss<TAB>dev-metric".
std::string format_epoch_record(const EpochRecord& rec);

struct TrainOutput {
  Checkpoint best;
  int best_epoch = 0;  // 0 when epochs == 0 (initial parameters kept)
  double best_metric = 0.0;
  std::vector<EpochRecord> log;
  long clamp_events = 0;  // times the loss had to clamp probs[target]
};

// Core training loop on already-parsed data: builds the vocabulary from the
// train set, initializes parameters (pretrained embeddings if configured),
// runs shuffled mini-batch AdaDelta for cfg.epochs epochs, evaluates on dev
// after each epoch, and keeps the checkpoint with the best dev metric (ties
// go to the earlier epoch). Emits one log line per epoch to `progress` when
// given. Fully deterministic in (data, cfg, seed) at any thread count.
TrainOutput train_on(const RunConfig& cfg, const std::vector<LabeledExample>& train_set,
                     const std::vector<LabeledExample>& dev_set,
                     const std::vector<std::string>& label_names,
                     std::ostream* progress = nullptr);

// File-level entry: parses cfg.train_path, takes dev from cfg.dev_path or a
// seeded dev-fraction carve, then defers to train_on.
TrainOutput train(const RunConfig& cfg, std::ostream* progress = nullptr);

struct CvOutput {
  std::vector<double> fold_scores;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over folds
};

// 10-fold-style protocol: trains one model per fold (dev carved from the
// fold's train part) and scores it on the held-out fold.
CvOutput run_cv(const RunConfig& cfg, std::ostream* progress = nullptr);

struct EvalOutput {
  double score = 0.0;
  std::vector<int> gold;
  std::vector<int> predictions;
  std::vector<double> confidence;  // probability of the predicted class
};

EvalOutput evaluate(const Checkpoint& ck, const std::vector<LabeledExample>& test,
                    Metric metric);
// Parses the corpus under the checkpoint's label set (unknown labels are a
// data error).
EvalOutput evaluate_file(const Checkpoint& ck, const std::string& path, Metric metric);

struct Prediction {
  int label = 0;
  double confidence = 0.0;
};

std::vector<Prediction> predict_file(const Checkpoint& ck, const std::string& path);

struct LengthBucket {
  int center = 0;  // representative length of the [center-w, center+w] window
  int count = 0;
  double mean_accuracy = 0.0;      // across runs
  std::vector<double> per_run;
};

// Accuracy by sentence length. Buckets are the disjoint windows
// [c-w, c+w] with centers w+1, 3w+2, ... so they partition the test set;
// empty buckets are omitted. Each checkpoint is one run (trained with a
// distinct seed); per-bucket accuracies are averaged across runs.
std::vector<LengthBucket> analyze_length(const std::vector<Checkpoint>& runs,
                                         const std::vector<RawExample>& test_raw, int window);
std::vector<LengthBucket> analyze_length_file(const std::vector<Checkpoint>& runs,
                                              const std::string& path, int window);

struct SweepCell {
  int filter = 0;
  int pool = 0;
  bool feasible = false;
  double dev_metric = 0.0;
};

// Trains one model per (filter size, pool size) cell over square sizes and
// reports the dev metric; infeasible cells are reported as skipped.
std::vector<SweepCell> sweep(const RunConfig& base, const std::vector<int>& sizes,
                             std::ostream* progress = nullptr);

struct GradcheckOutcome {
  Variant variant;
  FiniteDiffReport report;
};

// Builds a small synthetic example per variant and runs the
// finite-difference verifier. Enforces the small-dimension contract
// (hidden <= 16, sequence length <= 12).
std::vector<GradcheckOutcome> run_gradcheck(const RunConfig& cfg,
                                            const std::vector<Variant>& variants, int length,
                                            double epsilon, int samples, bool corrupt_conv);

// Threshold below which a gradient check group passes.
inline constexpr double kGradcheckThreshold = 1e-4;

}  // namespace b2dcnn
