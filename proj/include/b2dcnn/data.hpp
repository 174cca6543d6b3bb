#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "b2dcnn/matrix.hpp"

namespace b2dcnn {

struct LabeledExample {
  std::vector<std::string> tokens;
  int label = -1;
};

// Token <-> index mapping. Index 0 is always the unknown token; lookups of
// unseen tokens resolve to it.
class Vocabulary {
 public:
  static constexpr int kUnkIndex = 0;
  static constexpr const char* kUnkToken = "<unk>";

  Vocabulary();
  static Vocabulary from_tokens(const std::vector<std::string>& tokens);

  int add(const std::string& token);
  int lookup(const std::string& token) const;
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::string& token(int index) const { return tokens_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> tokens_;
};

struct RawExample {
  std::string label;
  std::vector<std::string> tokens;
};

// Corpus file format: one example per line, "label<TAB>pre-tokenized text",
// text split on whitespace. Malformed lines are reported with their line
// number. lowercase applies ASCII lowercasing to the text (not the label).
std::vector<RawExample> parse_labeled_lines(const std::string& path, bool lowercase);

struct ParsedDataset {
  std::vector<LabeledExample> examples;
  std::vector<std::string> label_names;  // dense indices in first-appearance order
};

ParsedDataset parse_dataset(const std::string& path, bool lowercase);

// Maps raw examples onto an existing label set; unknown labels are a data
// error (used when scoring against a trained model's label space).
std::vector<LabeledExample> assign_labels(const std::vector<RawExample>& raw,
                                          const std::vector<std::string>& label_names,
                                          const std::string& what);

// "label<TAB>tokens joined by single spaces"; parse round-trips this exactly.
std::string serialize_example(const LabeledExample& ex,
                              const std::vector<std::string>& label_names);

Vocabulary build_vocab(const std::vector<LabeledExample>& examples);

struct PretrainedResult {
  Matrix table;  // |V| x d_w
  int covered = 0;
};

// Embedding file format: one "token v1 ... v_dw" per line, space-separated
// decimal reals. Rows for covered vocabulary tokens are copied from the
// file; every other row (and the whole table when the file covers nothing)
// is drawn uniform on [-0.1, 0.1]. A matched line whose vector length is not
// d_w is a format error naming the token.
PretrainedResult load_pretrained(const std::string& path, const Vocabulary& vocab, int d_w,
                                 RandomSource& rng);

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> dev;
  std::vector<LabeledExample> test;
  int fold_id = -1;
};

// Carves a seeded random dev set of round(fraction * n) examples.
DatasetSplit make_dev_split(const std::vector<LabeledExample>& examples, double fraction,
                            RandomSource& rng);

// Near-equal fold sizes (difference <= 1); each example lands in exactly one
// test fold.
std::vector<DatasetSplit> make_cv_splits(const std::vector<LabeledExample>& examples, int folds,
                                         RandomSource& rng);

// Deterministically shuffled index batches; the final partial batch is kept.
// Reshuffling per epoch is the caller's job: pass a seed derived from
// (run seed, epoch index).
std::vector<std::vector<std::size_t>> minibatches(std::size_t n_examples, int size,
                                                  std::uint64_t epoch_seed);

}  // namespace b2dcnn
