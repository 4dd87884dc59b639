#pragma once

#include <span>

#include "gemini/error.hpp"

namespace gemini {

// F1 with malicious (1) as the positive class; 0 when precision + recall is 0.
inline double f1_score(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ValidationError("f1_score: length mismatch");
  if (predictions.empty()) throw ValidationError("f1_score: empty input");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("f1_score: labels must be 0 or 1");
    const bool pred = predictions[i] == 1;
    const bool truth = labels[i] == 1;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }
  if (tp == 0) return 0.0;
  const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  return 2.0 * precision * recall / (precision + recall);
}

} // namespace gemini
