#include "b2dcnn/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace b2dcnn {

Vocabulary::Vocabulary() {
  tokens_.push_back(kUnkToken);
  index_[kUnkToken] = kUnkIndex;
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens) {
  if (tokens.empty() || tokens[0] != kUnkToken) {
    throw DataError("Vocabulary::from_tokens: first token must be the reserved unknown token");
  }
  Vocabulary v;
  for (std::size_t i = 1; i < tokens.size(); ++i) v.add(tokens[i]);
  if (v.size() != static_cast<int>(tokens.size())) {
    throw DataError("Vocabulary::from_tokens: duplicate tokens in list");
  }
  return v;
}

int Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const int idx = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, idx);
  return idx;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkIndex : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

namespace {

std::vector<std::string> split_whitespace(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t start = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

void ascii_lower(std::string& s) {
  for (char& c : s) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
}

}  // namespace

std::vector<RawExample> parse_labeled_lines(const std::string& path, bool lowercase) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open corpus file: " + path);
  }
  std::vector<RawExample> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected \"label<TAB>text\", no tab found");
    }
    RawExample ex;
    ex.label = line.substr(0, tab);
    if (ex.label.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty label");
    }
    std::string text = line.substr(tab + 1);
    if (lowercase) ascii_lower(text);
    ex.tokens = split_whitespace(text);
    if (ex.tokens.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty token list");
    }
    out.push_back(std::move(ex));
  }
  return out;
}

ParsedDataset parse_dataset(const std::string& path, bool lowercase) {
  ParsedDataset ds;
  std::unordered_map<std::string, int> label_map;
  for (auto& raw : parse_labeled_lines(path, lowercase)) {
    auto [it, inserted] = label_map.emplace(raw.label, static_cast<int>(ds.label_names.size()));
    if (inserted) ds.label_names.push_back(raw.label);
    ds.examples.push_back(LabeledExample{std::move(raw.tokens), it->second});
  }
  return ds;
}

std::vector<LabeledExample> assign_labels(const std::vector<RawExample>& raw,
                                          const std::vector<std::string>& label_names,
                                          const std::string& what) {
  std::unordered_map<std::string, int> label_map;
  for (std::size_t i = 0; i < label_names.size(); ++i) {
    label_map.emplace(label_names[i], static_cast<int>(i));
  }
  std::vector<LabeledExample> out;
  out.reserve(raw.size());
  for (const auto& r : raw) {
    auto it = label_map.find(r.label);
    if (it == label_map.end()) {
      throw DataError("unknown label '" + r.label + "' in " + what);
    }
    out.push_back(LabeledExample{r.tokens, it->second});
  }
  return out;
}

std::string serialize_example(const LabeledExample& ex,
                              const std::vector<std::string>& label_names) {
  std::string out = label_names.at(static_cast<std::size_t>(ex.label));
  out += '\t';
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += ex.tokens[i];
  }
  return out;
}

Vocabulary build_vocab(const std::vector<LabeledExample>& examples) {
  if (examples.empty()) {
    throw DataError("build_vocab: empty example list");
  }
  Vocabulary v;
  for (const auto& ex : examples) {
    for (const auto& tok : ex.tokens) v.add(tok);
  }
  return v;
}

PretrainedResult load_pretrained(const std::string& path, const Vocabulary& vocab, int d_w,
                                 RandomSource& rng) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open embedding file: " + path);
  }
  // Draw the full table first so uncovered rows depend only on the seed, not
  // on which tokens the file happens to cover.
  PretrainedResult result;
  result.table = uniform_init(vocab.size(), d_w, -0.1, 0.1, rng);
  std::vector<bool> covered(static_cast<std::size_t>(vocab.size()), false);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp == std::string::npos) continue;
    const std::string token = line.substr(0, sp);
    if (!vocab.contains(token)) continue;
    const int row = vocab.lookup(token);
    int count = 0;
    const char* p = line.data() + sp;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      double value = 0.0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc()) {
        throw DataError("embedding file: malformed value for token '" + token + "'");
      }
      if (count < d_w) result.table(row, count) = value;
      ++count;
      p = next;
    }
    if (count != d_w) {
      throw DataError("embedding file: vector for token '" + token + "' has " +
                      std::to_string(count) + " values, expected " + std::to_string(d_w));
    }
    if (!covered[static_cast<std::size_t>(row)]) {
      covered[static_cast<std::size_t>(row)] = true;
      ++result.covered;
    }
  }
  return result;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, RandomSource& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  return idx;
}

}  // namespace

DatasetSplit make_dev_split(const std::vector<LabeledExample>& examples, double fraction,
                            RandomSource& rng) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw ConfigError("make_dev_split: fraction must be in (0, 1), got " +
                      std::to_string(fraction));
  }
  const std::size_t n = examples.size();
  auto idx = shuffled_indices(n, rng);
  std::size_t n_dev = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_dev >= n) n_dev = n - 1;
  DatasetSplit split;
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_dev ? split.dev : split.train).push_back(examples[idx[i]]);
  }
  return split;
}

std::vector<DatasetSplit> make_cv_splits(const std::vector<LabeledExample>& examples, int folds,
                                         RandomSource& rng) {
  const std::size_t n = examples.size();
  if (folds < 2 || static_cast<std::size_t>(folds) > n) {
    throw ConfigError("make_cv_splits: fold count " + std::to_string(folds) +
                      " invalid for " + std::to_string(n) + " examples");
  }
  auto idx = shuffled_indices(n, rng);
  // Fold f covers a contiguous block of the shuffled order; the first
  // n % folds folds get one extra example.
  std::size_t pos = 0;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (int f = 0; f < folds; ++f) {
    std::size_t len = n / static_cast<std::size_t>(folds) +
                      (static_cast<std::size_t>(f) < n % static_cast<std::size_t>(folds) ? 1 : 0);
    ranges.emplace_back(pos, pos + len);
    pos += len;
  }
  std::vector<DatasetSplit> splits(static_cast<std::size_t>(folds));
  for (int f = 0; f < folds; ++f) {
    auto& split = splits[static_cast<std::size_t>(f)];
    split.fold_id = f;
    for (std::size_t i = 0; i < n; ++i) {
      const bool in_test = i >= ranges[static_cast<std::size_t>(f)].first &&
                           i < ranges[static_cast<std::size_t>(f)].second;
      (in_test ? split.test : split.train).push_back(examples[idx[i]]);
    }
  }
  return splits;
}

std::vector<std::vector<std::size_t>> minibatches(std::size_t n_examples, int size,
                                                  std::uint64_t epoch_seed) {
  if (size < 1) {
    throw ConfigError("minibatches: size must be >= 1");
  }
  RandomSource rng(epoch_seed);
  auto idx = shuffled_indices(n_examples, rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < idx.size(); start += static_cast<std::size_t>(size)) {
    const std::size_t stop = std::min(idx.size(), start + static_cast<std::size_t>(size));
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

}  // namespace b2dcnn
