#pragma once

#include <string>
#include <vector>

#include "b2dcnn/common.hpp"

namespace b2dcnn {

enum class Metric { Accuracy, MacroF1 };

std::string to_string(Metric m);
Metric metric_from_string(const std::string& s);

double accuracy(const std::vector<int>& gold, const std::vector<int>& pred);

// Unweighted mean of per-class F1; precision/recall with zero denominators
// count as 0, as does F1 when precision + recall = 0.
double macro_f1(const std::vector<int>& gold, const std::vector<int>& pred, int n_classes);

double metric_score(Metric m, const std::vector<int>& gold, const std::vector<int>& pred,
                    int n_classes);

}  // namespace b2dcnn
