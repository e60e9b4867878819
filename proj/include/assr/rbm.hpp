#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace assr {

using Rng = std::mt19937_64;

// Bernoulli-Bernoulli RBM. W is hidden x visible; `a` is the hidden bias and
// `b` the visible bias, so that P(h_j=1|v) = sigmoid(W_j v + a_j).
struct RbmLayer {
  Eigen::MatrixXd W;
  Eigen::VectorXd a;
  Eigen::VectorXd b;

  Eigen::Index hidden() const { return W.rows(); }
  Eigen::Index visible() const { return W.cols(); }

  static RbmLayer Zeros(Eigen::Index visible, Eigen::Index hidden);
};

struct RbmGradient {
  Eigen::MatrixXd dW;
  Eigen::VectorXd da;
  Eigen::VectorXd db;
};

inline double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Limit on visible + hidden units for the enumeration-based routines.
inline constexpr Eigen::Index kMaxEnumerableUnits = 20;

// E(v,h) = -a'h - b'v - h'Wv. Throws DimensionMismatch.
double RbmEnergy(const RbmLayer& layer, const Eigen::VectorXd& v, const Eigen::VectorXd& h);

// Exact joint probability by enumeration. Throws TooLarge.
double RbmJointProb(const RbmLayer& layer, const Eigen::VectorXd& v, const Eigen::VectorXd& h);

// log of the partition function, by enumeration over visible states.
double RbmLogPartition(const RbmLayer& layer);

// Mean log P(v) over the rows of `data` (binary), by enumeration.
double RbmMeanLogLikelihood(const RbmLayer& layer, const Eigen::MatrixXd& data);

Eigen::VectorXd HiddenGivenVisible(const RbmLayer& layer, const Eigen::VectorXd& v);
Eigen::VectorXd VisibleGivenHidden(const RbmLayer& layer, const Eigen::VectorXd& h);

// Batched conditionals; rows are samples.
Eigen::MatrixXd HiddenProbs(const RbmLayer& layer, const Eigen::MatrixXd& v);
Eigen::MatrixXd VisibleProbs(const RbmLayer& layer, const Eigen::MatrixXd& h);

// Gradient of the mean log-likelihood of the rows of `data`, with the model
// expectation computed exactly. Throws TooLarge.
RbmGradient ExactLoglikGradient(const RbmLayer& layer, const Eigen::MatrixXd& data);

struct CdParams {
  int k = 1;
  // Sample binary visible states inside the Gibbs chain instead of using
  // mean-field reconstructions.
  bool sample_visible = false;
};

// CD-k estimate of the log-likelihood gradient averaged over the batch rows.
// Data statistics use P(h|v); the reconstruction uses k alternating Gibbs
// steps with binary hidden samples and probabilities for the final hidden
// statistics.
RbmGradient CdGradient(const RbmLayer& layer, const Eigen::MatrixXd& batch, const CdParams& params,
                       Rng& rng);

struct CdStep {
  double learning_rate = 0.05;
  double momentum = 0.5;
  CdParams cd;
};

// Momentum update: velocity <- momentum * velocity + lr * grad; layer += velocity.
// `velocity` is resized on first use.
RbmLayer CdUpdate(const RbmLayer& layer, const Eigen::MatrixXd& batch, const CdStep& step,
                  RbmGradient& velocity, Rng& rng);

}  // namespace assr
