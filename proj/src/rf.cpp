#include "assr/rf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "assr/error.hpp"
#include "assr/random.hpp"

namespace assr {
namespace {

using Counts = std::array<uint32_t, kNumClasses>;

double GiniMass(const Counts& c, double n) {
  // n * gini = n - sum(c_k^2)/n
  if (n <= 0) return 0;
  double sq = 0;
  for (uint32_t v : c) sq += static_cast<double>(v) * static_cast<double>(v);
  return n - sq / n;
}

struct BuildItem {
  int node;
  std::vector<std::size_t> samples;
  int depth;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const std::vector<int>& y, const RfConfig& cfg, int mtry,
              std::mt19937_64& rng)
      : X_(X), y_(y), cfg_(cfg), mtry_(mtry), rng_(rng) {}

  DecisionTree Build(std::vector<std::size_t> samples) {
    DecisionTree tree;
    tree.nodes.emplace_back();
    std::vector<BuildItem> stack;
    stack.push_back({0, std::move(samples), 0});
    while (!stack.empty()) {
      BuildItem item = std::move(stack.back());
      stack.pop_back();
      Counts counts{};
      for (std::size_t s : item.samples) counts[static_cast<std::size_t>(y_[s])]++;
      const bool pure = std::count_if(counts.begin(), counts.end(), [](uint32_t c) { return c > 0; }) <= 1;
      const bool depth_limited = cfg_.max_depth > 0 && item.depth >= cfg_.max_depth;
      const bool too_small = item.samples.size() < 2 * static_cast<std::size_t>(cfg_.min_leaf);
      Split split;
      if (!pure && !depth_limited && !too_small) split = FindSplit(item.samples, counts);
      if (split.feature < 0) {
        tree.nodes[static_cast<std::size_t>(item.node)].counts = counts;
        continue;
      }
      std::vector<std::size_t> left, right;
      for (std::size_t s : item.samples) {
        (X_(static_cast<Eigen::Index>(s), split.feature) <= split.threshold ? left : right).push_back(s);
      }
      const int left_id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      const int right_id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[static_cast<std::size_t>(item.node)];
      node.feature = split.feature;
      node.threshold = split.threshold;
      node.left = left_id;
      node.right = right_id;
      stack.push_back({right_id, std::move(right), item.depth + 1});
      stack.push_back({left_id, std::move(left), item.depth + 1});
    }
    return tree;
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0;
  };

  Split FindSplit(const std::vector<std::size_t>& samples, const Counts& total) {
    const auto d = static_cast<int>(X_.cols());
    std::vector<int> features(static_cast<std::size_t>(d));
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng_);

    const double n = static_cast<double>(samples.size());
    const auto min_leaf = static_cast<std::size_t>(cfg_.min_leaf);
    double best_impurity = GiniMass(total, n);
    Split best;
    int evaluated = 0;
    std::vector<std::pair<double, int>> column(samples.size());
    for (int f : features) {
      if (evaluated >= mtry_) break;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        column[i] = {X_(static_cast<Eigen::Index>(samples[i]), f), y_[samples[i]]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;  // constant here; does not count
      ++evaluated;
      Counts left{};
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        left[static_cast<std::size_t>(column[i].second)]++;
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t n_left = i + 1;
        if (n_left < min_leaf || column.size() - n_left < min_leaf) continue;
        Counts right{};
        for (std::size_t k = 0; k < kNumClasses; ++k) right[k] = total[k] - left[k];
        const double impurity = GiniMass(left, static_cast<double>(n_left)) +
                                GiniMass(right, static_cast<double>(column.size() - n_left));
        if (impurity < best_impurity - 1e-12) {
          best_impurity = impurity;
          best.feature = f;
          double mid = 0.5 * (column[i].first + column[i + 1].first);
          if (!(mid < column[i + 1].first)) mid = column[i].first;
          best.threshold = mid;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& X_;
  const std::vector<int>& y_;
  const RfConfig& cfg_;
  int mtry_;
  std::mt19937_64& rng_;
};

ClassProbabilities LeafProportions(const TreeNode& leaf) {
  ClassProbabilities p{};
  double total = 0;
  for (uint32_t c : leaf.counts) total += c;
  for (std::size_t k = 0; k < kNumClasses; ++k) p[k] = static_cast<double>(leaf.counts[k]) / total;
  return p;
}

}  // namespace

const TreeNode& DecisionTree::Leaf(std::span<const double> x) const {
  const TreeNode* node = &nodes[0];
  while (node->feature >= 0) {
    node = &nodes[static_cast<std::size_t>(
        x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right)];
  }
  return *node;
}

RfModel TrainRf(const Eigen::MatrixXd& X_in, std::span<const Stage> y_in, const RfConfig& cfg) {
  if (X_in.rows() == 0) throw Error(ErrorCode::kEmptyData, "no random forest training data");
  if (static_cast<std::size_t>(X_in.rows()) != y_in.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "forest inputs and labels differ in length");
  }
  if (cfg.n_trees < 1 || cfg.min_leaf < 1) {
    throw Error(ErrorCode::kInvalidConfig, "n_trees and min_leaf must be positive");
  }
  for (Stage s : y_in) {
    if (!IsClass(s)) throw Error(ErrorCode::kExcludedLabel, "forest labels must be merged classes");
  }

  // Canonical row order: lexicographic on (features, label).
  const auto n = static_cast<std::size_t>(X_in.rows());
  const auto d = static_cast<int>(X_in.cols());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    for (int f = 0; f < d; ++f) {
      const double va = X_in(static_cast<Eigen::Index>(a), f);
      const double vb = X_in(static_cast<Eigen::Index>(b), f);
      if (va != vb) return va < vb;
    }
    return y_in[a] < y_in[b];
  });
  Eigen::MatrixXd X(X_in.rows(), X_in.cols());
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    X.row(static_cast<Eigen::Index>(i)) = X_in.row(static_cast<Eigen::Index>(order[i]));
    y[i] = static_cast<int>(ClassIndex(y_in[order[i]]));
  }

  RfModel model;
  model.n_features = d;
  model.seed = cfg.seed;
  model.features_per_split = cfg.features_per_split > 0
                                 ? std::min(cfg.features_per_split, d)
                                 : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));

  std::vector<ClassProbabilities> oob_votes(n, ClassProbabilities{});
  std::vector<bool> has_oob(n, false);
  for (int t = 0; t < cfg.n_trees; ++t) {
    std::mt19937_64 rng(MixSeed(cfg.seed, (uint64_t{kStreamRf} << 32) + static_cast<uint64_t>(t)));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> bag(n);
    std::vector<bool> in_bag(n, false);
    for (auto& s : bag) {
      s = pick(rng);
      in_bag[s] = true;
    }
    std::sort(bag.begin(), bag.end());
    TreeBuilder builder(X, y, cfg, model.features_per_split, rng);
    DecisionTree tree = builder.Build(std::move(bag));
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      const Eigen::VectorXd row = X.row(static_cast<Eigen::Index>(i)).transpose();
      const auto p = LeafProportions(tree.Leaf({row.data(), static_cast<std::size_t>(row.size())}));
      for (std::size_t k = 0; k < kNumClasses; ++k) oob_votes[i][k] += p[k];
      has_oob[i] = true;
    }
    model.trees.push_back(std::move(tree));
  }

  std::size_t oob_total = 0, oob_correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!has_oob[i]) continue;
    ++oob_total;
    if (ArgmaxStage(oob_votes[i]) == ClassAt(static_cast<std::size_t>(y[i]))) ++oob_correct;
  }
  model.oob_accuracy = oob_total == 0 ? std::numeric_limits<double>::quiet_NaN()
                                      : static_cast<double>(oob_correct) / static_cast<double>(oob_total);
  return model;
}

Prediction PredictRf(const RfModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.n_features) {
    throw Error(ErrorCode::kDimensionMismatch, "forest query has " + std::to_string(x.size()) +
                                                   " features, model expects " +
                                                   std::to_string(model.n_features));
  }
  ClassProbabilities p{};
  for (const auto& tree : model.trees) {
    const auto leaf = LeafProportions(tree.Leaf(x));
    for (std::size_t k = 0; k < kNumClasses; ++k) p[k] += leaf[k];
  }
  for (double& v : p) v /= static_cast<double>(model.trees.size());
  return MakePrediction(p);
}

}  // namespace assr
