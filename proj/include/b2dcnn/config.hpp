#pragma once

#include <cstdint>
#include <string>

#include "b2dcnn/metrics.hpp"
#include "b2dcnn/model.hpp"

namespace b2dcnn {

// Run configuration. Defaults are the reference hyperparameters: 300-dim
// embeddings, 300 hidden units, 100 (3,3) filters, (2,2) pooling, batch 10,
// AdaDelta learning rate 1.0, dropout 0.5/0.2/0.4, L2 coefficient 1e-5.
struct RunConfig {
  Variant variant = Variant::BLSTM2DCNN;
  int embed_dim = 300;
  int hidden = 300;
  int n_filters = 100;
  int filter_k = 3;
  int filter_d = 3;
  int pool_p1 = 2;
  int pool_p2 = 2;
  double dropout_embed = 0.5;
  double dropout_blstm = 0.2;
  double dropout_penult = 0.4;
  double lambda = 1e-5;
  double lr = 1.0;
  int batch = 10;
  int epochs = 25;
  std::uint64_t seed = 1;
  Metric metric = Metric::Accuracy;
  int threads = 1;      // >1 enables the concurrent mini-batch worker pool
  int max_len = 0;      // 0 = no truncation
  int cv = 0;           // 0 = off, otherwise fold count
  double dev_fraction = 0.1;
  bool lowercase = false;
  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string embeddings_path;
  std::string checkpoint_path;
};

// Applies one "key = value" setting; unknown keys and unparsable values are
// configuration errors. The CLI funnels its overrides through the same
// entry point as the config file.
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Reads a "key = value" file ('#' comments and blank lines allowed).
void apply_config_file(RunConfig& cfg, const std::string& path);

// "KxD" (e.g. "3x3") -> pair of positive ints.
std::pair<int, int> parse_size_pair(const std::string& s, const std::string& what);

}  // namespace b2dcnn
