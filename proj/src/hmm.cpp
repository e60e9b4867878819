#include "assr/hmm.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "assr/error.hpp"

namespace assr {
namespace {

double SafeLog(double p) { return p > 0 ? std::log(p) : -std::numeric_limits<double>::infinity(); }

}  // namespace

double HmmModel::EmissionLogDensity(std::size_t state, const Eigen::VectorXd& x) const {
  const Eigen::VectorXd& mu = means[state];
  const Eigen::VectorXd& var = variances[state];
  double out = 0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double d = x(i) - mu(i);
    out -= 0.5 * (std::log(2 * std::numbers::pi * var(i)) + d * d / var(i));
  }
  return out;
}

HmmModel TrainHmm(const std::vector<std::vector<Stage>>& label_sequences, const Eigen::MatrixXd& X,
                  std::span<const Stage> y) {
  if (X.rows() == 0) throw Error(ErrorCode::kEmptyData, "no HMM emission data");
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "HMM inputs and labels differ in length");
  }
  HmmModel model;
  std::array<double, kNumClasses> freq{};
  std::array<std::array<double, kNumClasses>, kNumClasses> bigrams{};
  double total = 0;
  for (const auto& seq : label_sequences) {
    for (std::size_t t = 0; t < seq.size(); ++t) {
      if (!IsClass(seq[t])) throw Error(ErrorCode::kExcludedLabel, "HMM sequences must hold merged classes");
      freq[ClassIndex(seq[t])] += 1;
      total += 1;
      if (t > 0) bigrams[ClassIndex(seq[t - 1])][ClassIndex(seq[t])] += 1;
    }
  }
  for (std::size_t s = 0; s < kNumClasses; ++s) {
    if (freq[s] == 0) {
      throw Error(ErrorCode::kMissingState,
                  std::string(StageName(ClassAt(s))) + " is absent from the training sequences");
    }
    model.initial[s] = freq[s] / total;
    double row = 0;
    for (std::size_t r = 0; r < kNumClasses; ++r) row += bigrams[s][r] + 1.0;
    for (std::size_t r = 0; r < kNumClasses; ++r) model.transition[s][r] = (bigrams[s][r] + 1.0) / row;
  }

  std::array<std::size_t, kNumClasses> counts{};
  for (std::size_t s = 0; s < kNumClasses; ++s) {
    model.means[s] = Eigen::VectorXd::Zero(X.cols());
    model.variances[s] = Eigen::VectorXd::Zero(X.cols());
  }
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const Stage label = y[static_cast<std::size_t>(i)];
    if (!IsClass(label)) throw Error(ErrorCode::kExcludedLabel, "HMM labels must be merged classes");
    model.means[ClassIndex(label)] += X.row(i).transpose();
    counts[ClassIndex(label)]++;
  }
  for (std::size_t s = 0; s < kNumClasses; ++s) {
    if (counts[s] == 0) {
      throw Error(ErrorCode::kMissingState,
                  std::string(StageName(ClassAt(s))) + " has no emission training samples");
    }
    model.means[s] /= static_cast<double>(counts[s]);
  }
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const std::size_t s = ClassIndex(y[static_cast<std::size_t>(i)]);
    model.variances[s] += (X.row(i).transpose() - model.means[s]).cwiseAbs2();
  }
  for (std::size_t s = 0; s < kNumClasses; ++s) {
    model.variances[s] /= static_cast<double>(counts[s]);
    model.variances[s] = model.variances[s].cwiseMax(kHmmVarianceFloor);
  }
  return model;
}

std::vector<Stage> Viterbi(const HmmModel& model, const Eigen::MatrixXd& sequence) {
  const Eigen::Index T = sequence.rows();
  if (T == 0) throw Error(ErrorCode::kEmptySequence, "nothing to decode");
  if (sequence.cols() != model.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "observation dimension " + std::to_string(sequence.cols()) +
                                                   " differs from model " + std::to_string(model.dim()));
  }
  constexpr std::size_t S = kNumClasses;
  std::array<std::array<double, S>, S> log_a{};
  for (std::size_t i = 0; i < S; ++i) {
    for (std::size_t j = 0; j < S; ++j) log_a[i][j] = SafeLog(model.transition[i][j]);
  }
  std::vector<std::array<double, S>> delta(static_cast<std::size_t>(T));
  std::vector<std::array<uint8_t, S>> back(static_cast<std::size_t>(T));
  for (std::size_t s = 0; s < S; ++s) {
    delta[0][s] = SafeLog(model.initial[s]) + model.EmissionLogDensity(s, sequence.row(0).transpose());
  }
  for (Eigen::Index t = 1; t < T; ++t) {
    const Eigen::VectorXd x = sequence.row(t).transpose();
    const auto& prev = delta[static_cast<std::size_t>(t - 1)];
    for (std::size_t j = 0; j < S; ++j) {
      std::size_t arg = 0;
      double best = prev[0] + log_a[0][j];
      for (std::size_t i = 1; i < S; ++i) {
        const double v = prev[i] + log_a[i][j];
        if (v > best) {
          best = v;
          arg = i;
        }
      }
      delta[static_cast<std::size_t>(t)][j] = best + model.EmissionLogDensity(j, x);
      back[static_cast<std::size_t>(t)][j] = static_cast<uint8_t>(arg);
    }
  }
  std::size_t state = 0;
  const auto& last = delta.back();
  for (std::size_t s = 1; s < S; ++s) {
    if (last[s] > last[state]) state = s;
  }
  std::vector<Stage> path(static_cast<std::size_t>(T));
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    path[static_cast<std::size_t>(t)] = ClassAt(state);
    if (t > 0) state = back[static_cast<std::size_t>(t)][state];
  }
  return path;
}

double PathLogProbability(const HmmModel& model, const Eigen::MatrixXd& sequence,
                          std::span<const Stage> path) {
  if (static_cast<std::size_t>(sequence.rows()) != path.size() || path.empty()) {
    throw Error(ErrorCode::kLengthMismatch, "path and sequence lengths differ");
  }
  double lp = SafeLog(model.initial[ClassIndex(path[0])]);
  for (std::size_t t = 0; t < path.size(); ++t) {
    if (t > 0) lp += SafeLog(model.transition[ClassIndex(path[t - 1])][ClassIndex(path[t])]);
    lp += model.EmissionLogDensity(ClassIndex(path[t]), sequence.row(static_cast<Eigen::Index>(t)).transpose());
  }
  return lp;
}

}  // namespace assr
