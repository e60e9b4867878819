#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "assr/rbm.hpp"

namespace assr {

using ArchCandidate = std::vector<int>;

// Candidates must be strictly decreasing and end in 15 or 20 units.
void ValidateArchCandidate(const ArchCandidate& arch);
std::string FormatArch(const ArchCandidate& arch);

// The four configurations searched by default; the last one is the
// default architecture.
std::vector<ArchCandidate> DefaultArchCandidates();
ArchCandidate DefaultArchitecture();

struct InputScaling {
  double clip_sigmas = 3.0;
};

// Per-recording amplitude statistics used by ScaleInput.
struct RecordingStats {
  double mean = 0;
  double std = 0;
};

RecordingStats ComputeRecordingStats(std::span<const double> x);

// Clip to mean +/- clip_sigmas*std and map that interval affinely onto
// [0, 1]. Zero variance yields 0.5 everywhere.
std::vector<double> ScaleInput(const RecordingStats& stats, const InputScaling& scaling,
                               std::span<const double> sub_epoch);

// Untied decoder layer of a fine-tuned model: maps layer k's hidden
// activations back to its visible units.
struct DecoderLayer {
  Eigen::MatrixXd W;  // visible x hidden
  Eigen::VectorXd bias;
};

struct DbnModel {
  std::vector<RbmLayer> layers;
  std::vector<DecoderLayer> decoder;  // empty until fine-tuned; decoder[k] inverts layers[k]
  int input_dim = 384;
  InputScaling input_scaling;

  int feature_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().hidden()); }
  ArchCandidate architecture() const;
};

struct DbnTrainConfig {
  double learning_rate = 0.05;
  double momentum_initial = 0.5;
  double momentum_final = 0.9;
  int momentum_switch_epoch = 5;
  int epochs_per_layer = 30;
  int batch_size = 64;
  int cd_k = 1;
  bool sample_visible = false;
  double weight_init_std = 0.01;
  int fine_tune_epochs = 30;
  double fine_tune_lr = 0.01;
  double fine_tune_momentum = 0.9;
  int fine_tune_batch_size = 64;
  uint64_t seed = 0;
};

void ValidateDbnTrainConfig(const DbnTrainConfig& cfg);

// Per-epoch reconstruction error of the layer being trained, for diagnostics.
using LayerProgress = std::function<void(std::size_t layer, int epoch, double msre)>;

// Greedy layer-wise CD training; rows of `data` are samples in [0, 1].
// Throws EmptyData.
DbnModel TrainDbn(const Eigen::MatrixXd& data, const ArchCandidate& arch, const DbnTrainConfig& cfg,
                  const LayerProgress& progress = {});

// Deterministic up-pass through all layers (rows are samples).
Eigen::MatrixXd EncodeBatch(const DbnModel& model, const Eigen::MatrixXd& data);

// Deterministic down-pass from the top code to the input space, using the
// decoder when present and the transposed generative weights otherwise.
Eigen::MatrixXd DecodeBatch(const DbnModel& model, const Eigen::MatrixXd& code);

// Mean over samples and input dimensions of the squared reconstruction error.
// Throws EmptyData.
double Msre(const DbnModel& model, const Eigen::MatrixXd& data);

std::vector<double> ExtractUnsup(const DbnModel& model, std::span<const double> scaled);

// Autoencoder unrolled from a DBN: encoder layers followed by decoder layers.
struct Autoencoder {
  std::vector<Eigen::MatrixXd> weights;  // 2K matrices, each out x in
  std::vector<Eigen::VectorXd> biases;

  static Autoencoder Unroll(const DbnModel& model);
  void WriteBack(DbnModel& model) const;
};

struct AutoencoderGradient {
  double loss = 0;  // mean over samples of 0.5 * ||reconstruction - input||^2
  std::vector<Eigen::MatrixXd> d_weights;
  std::vector<Eigen::VectorXd> d_biases;
};

AutoencoderGradient AutoencoderLossAndGradient(const Autoencoder& net, const Eigen::MatrixXd& batch);
double AutoencoderLoss(const Autoencoder& net, const Eigen::MatrixXd& batch);

// Backpropagation fine-tuning of the unrolled autoencoder. An epoch that
// would raise the training MSRE is rejected and the step size halved, so the
// returned model never reconstructs the training data worse than the input.
DbnModel FineTune(const DbnModel& model, const Eigen::MatrixXd& data, const DbnTrainConfig& cfg,
                  std::vector<double>* msre_trace = nullptr);

using ArchEvaluator = std::function<double(const ArchCandidate& arch, const Eigen::MatrixXd& train,
                                           const Eigen::MatrixXd& held_out)>;

struct ArchSelection {
  ArchCandidate best;
  std::vector<std::pair<ArchCandidate, double>> table;
};

// Argmin of the MSRE table; ties go to the candidate with fewer hidden units.
ArchCandidate PickBestArchitecture(const std::vector<std::pair<ArchCandidate, double>>& table);

// Seeded 90/10 split of the rows; each candidate is scored by `evaluate`
// (default: TrainDbn + FineTune, MSRE on the held-out rows).
ArchSelection SelectArchitecture(const std::vector<ArchCandidate>& candidates,
                                 const Eigen::MatrixXd& data, const DbnTrainConfig& cfg,
                                 const ArchEvaluator& evaluate = {});

}  // namespace assr
