#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "assr/prediction.hpp"
#include "assr/stage.hpp"

namespace assr {

struct RfConfig {
  int n_trees = 100;
  int features_per_split = 0;  // <= 0 selects ceil(sqrt(dimension))
  int max_depth = 0;           // <= 0 means unlimited
  int min_leaf = 1;
  uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1;
  int right = -1;
  std::array<uint32_t, kNumClasses> counts{};  // leaves only
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& Leaf(std::span<const double> x) const;
};

struct RfModel {
  int n_features = 0;
  int features_per_split = 0;
  uint64_t seed = 0;
  std::vector<DecisionTree> trees;
  double oob_accuracy = 0;  // NaN when no sample was ever out of bag
};

// Bootstrap + Gini forest. Rows are sorted into a canonical order first, so
// the result does not depend on the input row order. Throws EmptyData.
RfModel TrainRf(const Eigen::MatrixXd& X, std::span<const Stage> y, const RfConfig& cfg);

// Mean over trees of the leaf class proportions. Throws DimensionMismatch.
Prediction PredictRf(const RfModel& model, std::span<const double> x);

}  // namespace assr
