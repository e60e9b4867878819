#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <numeric>

#include "assr/rf.hpp"
#include "test_util.hpp"

using namespace assr;
using Eigen::MatrixXd;

namespace {

struct Toy {
  MatrixXd X;
  std::vector<Stage> y;
};

// Class decided by thresholds on feature 0; the other features are noise.
Toy ThresholdData(int n, int dims, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 5);
  Toy t;
  t.X.resize(n, dims);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dims; ++d) t.X(i, d) = u(rng);
    t.y.push_back(ClassAt(static_cast<std::size_t>(std::min(4.0, std::floor(t.X(i, 0))))));
  }
  return t;
}

bool SameForest(const RfModel& a, const RfModel& b) {
  if (a.trees.size() != b.trees.size()) return false;
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    const auto& na = a.trees[t].nodes;
    const auto& nb = b.trees[t].nodes;
    if (na.size() != nb.size()) return false;
    for (std::size_t i = 0; i < na.size(); ++i) {
      if (na[i].feature != nb[i].feature || na[i].threshold != nb[i].threshold || na[i].left != nb[i].left ||
          na[i].right != nb[i].right || na[i].counts != nb[i].counts) {
        return false;
      }
    }
  }
  return true;
}

std::vector<double> Row(const MatrixXd& X, Eigen::Index r) {
  std::vector<double> v(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index c = 0; c < X.cols(); ++c) v[static_cast<std::size_t>(c)] = X(r, c);
  return v;
}

}  // namespace

TEST_CASE("forest determinism and defaults") {
  const Toy t = ThresholdData(300, 29, 1);
  RfConfig cfg;
  cfg.n_trees = 20;
  cfg.seed = 5;
  const RfModel a = TrainRf(t.X, t.y, cfg);
  CHECK(a.trees.size() == 20);
  CHECK(a.features_per_split == 6);
  CHECK(a.n_features == 29);
  CHECK(SameForest(a, TrainRf(t.X, t.y, cfg)));
  cfg.seed = 6;
  CHECK_FALSE(SameForest(a, TrainRf(t.X, t.y, cfg)));
  for (const auto& tree : a.trees) {
    for (const auto& n : tree.nodes) {
      if (n.feature < 0) {
        uint32_t total = 0;
        for (auto c : n.counts) total += c;
        CHECK(total > 0);
      }
    }
  }
}

TEST_CASE("row order does not matter") {
  const Toy t = ThresholdData(200, 8, 2);
  RfConfig cfg;
  cfg.n_trees = 15;
  cfg.seed = 3;
  const RfModel base = TrainRf(t.X, t.y, cfg);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Eigen::Index> perm(200);
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Toy p;
    p.X.resize(200, 8);
    for (int i = 0; i < 200; ++i) {
      p.X.row(i) = t.X.row(perm[static_cast<std::size_t>(i)]);
      p.y.push_back(t.y[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]);
    }
    const RfModel shuffled = TrainRf(p.X, p.y, cfg);
    CHECK(SameForest(base, shuffled));
    CHECK(shuffled.oob_accuracy == base.oob_accuracy);
  }
}

TEST_CASE("threshold-separable data has high out-of-bag accuracy") {
  const Toy t = ThresholdData(500, 29, 7);
  RfConfig cfg;
  cfg.seed = 1;
  const RfModel m = TrainRf(t.X, t.y, cfg);
  CHECK(m.trees.size() == 100);
  CHECK(m.oob_accuracy >= 0.95);

  const Toy test = ThresholdData(300, 29, 8);
  int correct = 0;
  for (int i = 0; i < 300; ++i) {
    const Prediction p = PredictRf(m, Row(test.X, i));
    double sum = 0;
    for (double v : p.class_probabilities) sum += v;
    CHECK(std::abs(sum - 1) <= 1e-12);
    CHECK(p.label == ArgmaxStage(p.class_probabilities));
    correct += p.label == test.y[static_cast<std::size_t>(i)];
  }
  CHECK(correct >= 285);
}

TEST_CASE("pure single-class data") {
  MatrixXd X = MatrixXd::Random(10, 3);
  const std::vector<Stage> y(10, Stage::kNrem2);
  RfConfig cfg;
  cfg.n_trees = 1;
  const RfModel m = TrainRf(X, y, cfg);
  REQUIRE(m.trees.size() == 1);
  CHECK(m.trees[0].nodes.size() == 1);
  const Prediction p = PredictRf(m, std::vector<double>{5, -5, 0});
  CHECK(p.label == Stage::kNrem2);
  CHECK(p.class_probabilities[ClassIndex(Stage::kNrem2)] == 1.0);
}

TEST_CASE("hand-built forest") {
  RfModel m;
  m.n_features = 2;
  DecisionTree t1;
  t1.nodes.resize(3);
  t1.nodes[0] = {0, 0.5, 1, 2, {}};
  t1.nodes[1].counts = {3, 1, 0, 0, 0};
  t1.nodes[2].counts = {0, 0, 2, 2, 0};
  DecisionTree t2;
  t2.nodes.resize(3);
  t2.nodes[0] = {1, 2.0, 1, 2, {}};
  t2.nodes[1].counts = {0, 0, 0, 0, 5};
  t2.nodes[2].counts = {1, 0, 0, 1, 0};
  m.trees = {t1, t2};

  // x0 <= 0.5 goes left in tree 1; x1 > 2 goes right in tree 2.
  const Prediction p = PredictRf(m, std::vector<double>{0.2, 3.0});
  const ClassProbabilities want = {(0.75 + 0.5) / 2, 0.25 / 2, 0, 0.5 / 2, 0};
  for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(p.class_probabilities[c] == doctest::Approx(want[c]).epsilon(1e-15));
  CHECK(p.label == Stage::kAwake);

  const Prediction q = PredictRf(m, std::vector<double>{1.0, 1.0});
  const ClassProbabilities want_q = {0, 0, 0.25, 0.25, 0.5};
  for (std::size_t c = 0; c < kNumClasses; ++c) CHECK(q.class_probabilities[c] == doctest::Approx(want_q[c]).epsilon(1e-15));
  CHECK(q.label == Stage::kRem);

  // Both trees agree on a pure leaf.
  t2.nodes[1].counts = {4, 0, 0, 0, 0};
  m.trees = {t1, t2};
  t1.nodes[1].counts = {2, 0, 0, 0, 0};
  m.trees[0] = t1;
  const Prediction r = PredictRf(m, std::vector<double>{0.0, 0.0});
  CHECK(r.class_probabilities[0] == 1.0);

  CHECK_THROWS_CODE(PredictRf(m, std::vector<double>{1.0}), ErrorCode::kDimensionMismatch);
}

TEST_CASE("forest training errors") {
  CHECK_THROWS_CODE(TrainRf(MatrixXd(0, 3), std::vector<Stage>{}, RfConfig{}), ErrorCode::kEmptyData);
  const std::vector<Stage> y = {Stage::kAwake};
  CHECK_THROWS_CODE(TrainRf(MatrixXd::Zero(2, 3), y, RfConfig{}), ErrorCode::kDimensionMismatch);
}
