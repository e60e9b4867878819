#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "assr/stage.hpp"

namespace assr {

inline constexpr double kHmmVarianceFloor = 1e-6;

// Five-state HMM over the sleep classes with diagonal-Gaussian emissions.
struct HmmModel {
  std::array<double, kNumClasses> initial{};
  std::array<std::array<double, kNumClasses>, kNumClasses> transition{};
  std::array<Eigen::VectorXd, kNumClasses> means;
  std::array<Eigen::VectorXd, kNumClasses> variances;

  int dim() const { return static_cast<int>(means[0].size()); }
  double EmissionLogDensity(std::size_t state, const Eigen::VectorXd& x) const;
};

// Supervised estimation. `label_sequences` are contiguous label runs in
// temporal order: the initial distribution is their label frequency and the
// transitions their add-one-smoothed bigram counts. Emissions are fitted on
// (X, y). Throws MissingState, EmptyData.
HmmModel TrainHmm(const std::vector<std::vector<Stage>>& label_sequences, const Eigen::MatrixXd& X,
                  std::span<const Stage> y);

// Rows of `sequence` are time steps. Throws EmptySequence, DimensionMismatch.
std::vector<Stage> Viterbi(const HmmModel& model, const Eigen::MatrixXd& sequence);

// log P(path, observations).
double PathLogProbability(const HmmModel& model, const Eigen::MatrixXd& sequence,
                          std::span<const Stage> path);

}  // namespace assr
