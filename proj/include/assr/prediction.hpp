#pragma once

#include <array>

#include "assr/stage.hpp"

namespace assr {

using ClassProbabilities = std::array<double, kNumClasses>;

struct Prediction {
  Stage label = Stage::kAwake;
  ClassProbabilities class_probabilities{};
};

// First maximum in the fixed stage order.
inline Stage ArgmaxStage(const ClassProbabilities& p) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return ClassAt(best);
}

inline Prediction MakePrediction(const ClassProbabilities& p) { return {ArgmaxStage(p), p}; }

}  // namespace assr
