#include "b2dcnn/metrics.hpp"

namespace b2dcnn {

std::string to_string(Metric m) {
  return m == Metric::Accuracy ? "accuracy" : "macro-f1";
}

Metric metric_from_string(const std::string& s) {
  if (s == "accuracy") return Metric::Accuracy;
  if (s == "macro-f1") return Metric::MacroF1;
  throw ConfigError("unknown metric '" + s + "' (expected accuracy | macro-f1)");
}

namespace {

void check_lengths(const std::vector<int>& gold, const std::vector<int>& pred) {
  if (gold.size() != pred.size() || gold.empty()) {
    throw ShapeError("metric: gold/pred length mismatch or empty");
  }
}

}  // namespace

double accuracy(const std::vector<int>& gold, const std::vector<int>& pred) {
  check_lengths(gold, pred);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == pred[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(gold.size());
}

double macro_f1(const std::vector<int>& gold, const std::vector<int>& pred, int n_classes) {
  check_lengths(gold, pred);
  std::vector<long> tp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> fp(static_cast<std::size_t>(n_classes), 0);
  std::vector<long> fn(static_cast<std::size_t>(n_classes), 0);
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] == pred[i]) {
      ++tp[static_cast<std::size_t>(gold[i])];
    } else {
      ++fp[static_cast<std::size_t>(pred[i])];
      ++fn[static_cast<std::size_t>(gold[i])];
    }
  }
  double sum = 0.0;
  for (int c = 0; c < n_classes; ++c) {
    const std::size_t ci = static_cast<std::size_t>(c);
    const double p = tp[ci] + fp[ci] > 0
                         ? static_cast<double>(tp[ci]) / static_cast<double>(tp[ci] + fp[ci])
                         : 0.0;
    const double r = tp[ci] + fn[ci] > 0
                         ? static_cast<double>(tp[ci]) / static_cast<double>(tp[ci] + fn[ci])
                         : 0.0;
    sum += p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return sum / static_cast<double>(n_classes);
}

double metric_score(Metric m, const std::vector<int>& gold, const std::vector<int>& pred,
                    int n_classes) {
  return m == Metric::Accuracy ? accuracy(gold, pred) : macro_f1(gold, pred, n_classes);
}

}  // namespace b2dcnn
