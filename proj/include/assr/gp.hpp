#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "assr/prediction.hpp"
#include "assr/stage.hpp"

namespace assr {

struct GpConfig {
  double signal_variance = 1.0;  // sigma_f^2
  double length_scale = 0.0;     // <= 0 selects sqrt(feature dimension)
  int max_points_per_class = 500;
  double newton_tolerance = 1e-6;
  int max_newton_iterations = 50;
  bool grid_search = false;  // 3x3 search on a held-out 20% of the training set
  uint64_t seed = 0;
};

// One-vs-rest binary classifier for a single stage.
struct GpBinaryModel {
  Stage positive = Stage::kAwake;
  Eigen::VectorXd latent_mode;  // posterior mode f_hat
  Eigen::VectorXd gradient;     // t - sigmoid(f_hat)
  Eigen::VectorXd sqrt_w;       // sqrt of the likelihood Hessian at the mode
  Eigen::MatrixXd chol;         // lower factor of I + sqrt(W) K sqrt(W); rebuilt on load
  std::vector<double> objective_trace;  // Laplace objective per Newton iteration
  int iterations = 0;
};

struct GpModel {
  Eigen::MatrixXd inputs;  // standardized training inputs, rows are points
  double signal_variance = 1.0;
  double length_scale = 1.0;
  std::vector<GpBinaryModel> classes;

  int dim() const { return static_cast<int>(inputs.cols()); }
  // Recomputes every Cholesky factor from the stored mode.
  void RebuildFactors();
};

double RbfKernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double signal_variance,
                 double length_scale);

Eigen::MatrixXd KernelMatrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double signal_variance,
                             double length_scale);

// Laplace-approximation fit of one binary model with labels t in {0, 1}.
GpBinaryModel FitBinaryGp(const Eigen::MatrixXd& K, const Eigen::VectorXd& targets, double tolerance,
                          int max_iterations);

// Throws EmptyData, SingleClass, DimensionMismatch.
GpModel TrainGp(const Eigen::MatrixXd& X, std::span<const Stage> y, const GpConfig& cfg);

// Per-class binary probabilities (probit-approximated predictive), in the
// order of model.classes.
std::vector<double> PredictGpBinary(const GpModel& model, const Eigen::VectorXd& x);

// Latent predictive mean and variance per class.
std::vector<std::pair<double, double>> PredictGpLatent(const GpModel& model, const Eigen::VectorXd& x);

// Normalized across classes; stages without a model get probability 0.
Prediction PredictGp(const GpModel& model, const Eigen::VectorXd& x);
// Same as PredictGp for every row of X, solved in blocks.
std::vector<Prediction> PredictGpBatch(const GpModel& model, const Eigen::MatrixXd& X);

}  // namespace assr
