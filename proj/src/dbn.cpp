#include "assr/dbn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "assr/error.hpp"
#include "assr/log.hpp"
#include "assr/random.hpp"

namespace assr {
namespace {

Eigen::MatrixXd Activate(const Eigen::MatrixXd& in, const Eigen::MatrixXd& W, const Eigen::VectorXd& bias) {
  Eigen::MatrixXd act = in * W.transpose();
  act.rowwise() += bias.transpose();
  return act.unaryExpr([](double t) { return Sigmoid(t); });
}

std::vector<Eigen::Index> Permutation(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

Eigen::MatrixXd GatherRows(const Eigen::MatrixXd& data, const std::vector<Eigen::Index>& order,
                           std::size_t begin, std::size_t end) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(end - begin), data.cols());
  for (std::size_t i = begin; i < end; ++i) out.row(static_cast<Eigen::Index>(i - begin)) = data.row(order[i]);
  return out;
}

double LayerReconstructionError(const RbmLayer& layer, const Eigen::MatrixXd& v) {
  const Eigen::MatrixXd recon = VisibleProbs(layer, HiddenProbs(layer, v));
  return (recon - v).squaredNorm() / static_cast<double>(v.size());
}

}  // namespace

void ValidateArchCandidate(const ArchCandidate& arch) {
  if (arch.empty()) throw Error(ErrorCode::kInvalidConfig, "architecture has no layers");
  for (std::size_t i = 0; i < arch.size(); ++i) {
    if (arch[i] <= 0 || (i > 0 && arch[i] >= arch[i - 1])) {
      throw Error(ErrorCode::kInvalidConfig, "architecture " + FormatArch(arch) +
                                                 " must have strictly decreasing positive widths");
    }
  }
  if (arch.back() != 15 && arch.back() != 20) {
    throw Error(ErrorCode::kInvalidConfig,
                "architecture " + FormatArch(arch) + " must end in 15 or 20 units");
  }
}

std::string FormatArch(const ArchCandidate& arch) {
  std::ostringstream out;
  for (std::size_t i = 0; i < arch.size(); ++i) out << (i ? " -> " : "") << arch[i];
  return out.str();
}

std::vector<ArchCandidate> DefaultArchCandidates() {
  return {{300, 225, 150, 50, 40, 30, 20},
          {200, 150, 80, 50, 35, 25, 20},
          {200, 100, 50, 25, 20, 15},
          {150, 75, 35, 25, 20, 15}};
}

ArchCandidate DefaultArchitecture() { return {150, 75, 35, 25, 20, 15}; }

ArchCandidate DbnModel::architecture() const {
  ArchCandidate arch;
  for (const auto& l : layers) arch.push_back(static_cast<int>(l.hidden()));
  return arch;
}

RecordingStats ComputeRecordingStats(std::span<const double> x) {
  RecordingStats s;
  if (x.empty()) return s;
  double sum = 0;
  for (double v : x) sum += v;
  s.mean = sum / static_cast<double>(x.size());
  double ss = 0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(x.size()));
  return s;
}

std::vector<double> ScaleInput(const RecordingStats& stats, const InputScaling& scaling,
                               std::span<const double> sub_epoch) {
  std::vector<double> out(sub_epoch.size(), 0.5);
  if (!(stats.std > 0)) return out;
  const double lo = stats.mean - scaling.clip_sigmas * stats.std;
  const double width = 2 * scaling.clip_sigmas * stats.std;
  for (std::size_t i = 0; i < sub_epoch.size(); ++i) {
    out[i] = std::clamp((sub_epoch[i] - lo) / width, 0.0, 1.0);
  }
  return out;
}

void ValidateDbnTrainConfig(const DbnTrainConfig& cfg) {
  if (!(cfg.learning_rate >= 0) || !(cfg.fine_tune_lr >= 0) || cfg.batch_size < 1 ||
      cfg.fine_tune_batch_size < 1 || cfg.cd_k < 1 || cfg.epochs_per_layer < 0 ||
      cfg.fine_tune_epochs < 0 || !(cfg.weight_init_std >= 0)) {
    throw Error(ErrorCode::kInvalidConfig, "invalid DBN training configuration");
  }
}

DbnModel TrainDbn(const Eigen::MatrixXd& data, const ArchCandidate& arch, const DbnTrainConfig& cfg,
                  const LayerProgress& progress) {
  ValidateDbnTrainConfig(cfg);
  if (data.rows() == 0 || data.cols() == 0) throw Error(ErrorCode::kEmptyData, "no DBN training data");
  if (arch.empty()) throw Error(ErrorCode::kInvalidConfig, "architecture has no layers");

  DbnModel model;
  model.input_dim = static_cast<int>(data.cols());
  Eigen::MatrixXd input = data;
  const auto n = static_cast<std::size_t>(data.rows());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (std::size_t k = 0; k < arch.size(); ++k) {
    Rng rng(MixSeed(cfg.seed, 1000 + k));
    std::normal_distribution<double> init(0.0, cfg.weight_init_std);
    RbmLayer layer = RbmLayer::Zeros(input.cols(), arch[k]);
    for (Eigen::Index c = 0; c < layer.W.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.W.rows(); ++r) layer.W(r, c) = init(rng);
    }
    RbmGradient velocity;
    CdStep step;
    step.learning_rate = cfg.learning_rate;
    step.cd = {cfg.cd_k, cfg.sample_visible};
    for (int epoch = 0; epoch < cfg.epochs_per_layer; ++epoch) {
      step.momentum = epoch < cfg.momentum_switch_epoch ? cfg.momentum_initial : cfg.momentum_final;
      const auto order = Permutation(input.rows(), rng);
      for (std::size_t begin = 0; begin < n; begin += batch) {
        const Eigen::MatrixXd mb = GatherRows(input, order, begin, std::min(n, begin + batch));
        layer = CdUpdate(layer, mb, step, velocity, rng);
      }
      if (progress) progress(k, epoch, LayerReconstructionError(layer, input));
    }
    input = HiddenProbs(layer, input);
    model.layers.push_back(std::move(layer));
  }
  return model;
}

Eigen::MatrixXd EncodeBatch(const DbnModel& model, const Eigen::MatrixXd& data) {
  if (data.cols() != model.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "input has " + std::to_string(data.cols()) +
                                                   " columns, model expects " +
                                                   std::to_string(model.input_dim));
  }
  Eigen::MatrixXd h = data;
  for (const auto& layer : model.layers) h = HiddenProbs(layer, h);
  return h;
}

Eigen::MatrixXd DecodeBatch(const DbnModel& model, const Eigen::MatrixXd& code) {
  Eigen::MatrixXd r = code;
  const bool untied = model.decoder.size() == model.layers.size();
  for (std::size_t k = model.layers.size(); k-- > 0;) {
    if (untied) {
      r = Activate(r, model.decoder[k].W, model.decoder[k].bias);
    } else {
      r = VisibleProbs(model.layers[k], r);
    }
  }
  return r;
}

double Msre(const DbnModel& model, const Eigen::MatrixXd& data) {
  if (data.rows() == 0) throw Error(ErrorCode::kEmptyData, "no data for MSRE");
  const Eigen::MatrixXd recon = DecodeBatch(model, EncodeBatch(model, data));
  return (recon - data).squaredNorm() / static_cast<double>(data.size());
}

std::vector<double> ExtractUnsup(const DbnModel& model, std::span<const double> scaled) {
  if (static_cast<int>(scaled.size()) != model.input_dim) {
    throw Error(ErrorCode::kDimensionMismatch, "sub-epoch has " + std::to_string(scaled.size()) +
                                                   " samples, model expects " +
                                                   std::to_string(model.input_dim));
  }
  Eigen::MatrixXd row(1, model.input_dim);
  for (int i = 0; i < model.input_dim; ++i) row(0, i) = scaled[static_cast<std::size_t>(i)];
  const Eigen::MatrixXd h = EncodeBatch(model, row);
  return {h.data(), h.data() + h.size()};
}

Autoencoder Autoencoder::Unroll(const DbnModel& model) {
  Autoencoder net;
  const std::size_t K = model.layers.size();
  const bool untied = model.decoder.size() == K;
  for (const auto& layer : model.layers) {
    net.weights.push_back(layer.W);
    net.biases.push_back(layer.a);
  }
  for (std::size_t k = K; k-- > 0;) {
    if (untied) {
      net.weights.push_back(model.decoder[k].W);
      net.biases.push_back(model.decoder[k].bias);
    } else {
      net.weights.push_back(model.layers[k].W.transpose());
      net.biases.push_back(model.layers[k].b);
    }
  }
  return net;
}

void Autoencoder::WriteBack(DbnModel& model) const {
  const std::size_t K = model.layers.size();
  model.decoder.resize(K);
  for (std::size_t k = 0; k < K; ++k) {
    model.layers[k].W = weights[k];
    model.layers[k].a = biases[k];
    model.decoder[k] = {weights[2 * K - 1 - k], biases[2 * K - 1 - k]};
  }
}

AutoencoderGradient AutoencoderLossAndGradient(const Autoencoder& net, const Eigen::MatrixXd& batch) {
  const std::size_t L = net.weights.size();
  std::vector<Eigen::MatrixXd> acts;
  acts.reserve(L + 1);
  acts.push_back(batch);
  for (std::size_t l = 0; l < L; ++l) acts.push_back(Activate(acts.back(), net.weights[l], net.biases[l]));

  const double inv_b = 1.0 / static_cast<double>(batch.rows());
  const Eigen::MatrixXd err = acts.back() - batch;
  AutoencoderGradient g;
  g.loss = 0.5 * err.squaredNorm() * inv_b;
  g.d_weights.resize(L);
  g.d_biases.resize(L);

  Eigen::MatrixXd delta =
      (err.array() * acts.back().array() * (1.0 - acts.back().array())).matrix() * inv_b;
  for (std::size_t l = L; l-- > 0;) {
    g.d_weights[l] = delta.transpose() * acts[l];
    g.d_biases[l] = delta.colwise().sum().transpose();
    if (l > 0) {
      delta = ((delta * net.weights[l]).array() * acts[l].array() * (1.0 - acts[l].array())).matrix();
    }
  }
  return g;
}

double AutoencoderLoss(const Autoencoder& net, const Eigen::MatrixXd& batch) {
  Eigen::MatrixXd a = batch;
  for (std::size_t l = 0; l < net.weights.size(); ++l) a = Activate(a, net.weights[l], net.biases[l]);
  return 0.5 * (a - batch).squaredNorm() / static_cast<double>(batch.rows());
}

DbnModel FineTune(const DbnModel& model, const Eigen::MatrixXd& data, const DbnTrainConfig& cfg,
                  std::vector<double>* msre_trace) {
  ValidateDbnTrainConfig(cfg);
  if (data.rows() == 0) throw Error(ErrorCode::kEmptyData, "no fine-tuning data");
  if (cfg.fine_tune_epochs == 0 || model.layers.empty()) return model;

  Autoencoder net = Autoencoder::Unroll(model);
  const auto zero_like = [](const Autoencoder& ref) {
    Autoencoder z = ref;
    for (auto& w : z.weights) w.setZero();
    for (auto& b : z.biases) b.setZero();
    return z;
  };
  Autoencoder velocity = zero_like(net);

  const double data_size = static_cast<double>(data.size());
  const auto full_msre = [&](const Autoencoder& ae) {
    return 2.0 * AutoencoderLoss(ae, data) * static_cast<double>(data.rows()) / data_size;
  };
  double current = full_msre(net);
  if (msre_trace) msre_trace->push_back(current);

  Rng rng(MixSeed(cfg.seed, kStreamFineTune));
  double lr = cfg.fine_tune_lr;
  const auto n = static_cast<std::size_t>(data.rows());
  const auto batch = static_cast<std::size_t>(cfg.fine_tune_batch_size);
  for (int epoch = 0; epoch < cfg.fine_tune_epochs; ++epoch) {
    Autoencoder candidate = net;
    Autoencoder cand_velocity = velocity;
    const auto order = Permutation(data.rows(), rng);
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const Eigen::MatrixXd mb = GatherRows(data, order, begin, std::min(n, begin + batch));
      const AutoencoderGradient g = AutoencoderLossAndGradient(candidate, mb);
      for (std::size_t l = 0; l < candidate.weights.size(); ++l) {
        cand_velocity.weights[l] = cfg.fine_tune_momentum * cand_velocity.weights[l] - lr * g.d_weights[l];
        cand_velocity.biases[l] = cfg.fine_tune_momentum * cand_velocity.biases[l] - lr * g.d_biases[l];
        candidate.weights[l] += cand_velocity.weights[l];
        candidate.biases[l] += cand_velocity.biases[l];
      }
    }
    const double next = full_msre(candidate);
    if (std::isfinite(next) && next <= current) {
      net = std::move(candidate);
      velocity = std::move(cand_velocity);
      current = next;
    } else {
      lr *= 0.5;
      velocity = zero_like(net);
    }
    if (msre_trace) msre_trace->push_back(current);
  }

  DbnModel out = model;
  net.WriteBack(out);
  return out;
}

ArchCandidate PickBestArchitecture(const std::vector<std::pair<ArchCandidate, double>>& table) {
  if (table.empty()) throw Error(ErrorCode::kEmptyCandidates, "no architecture candidates");
  const auto units = [](const ArchCandidate& a) { return std::accumulate(a.begin(), a.end(), 0L); };
  std::size_t best = 0;
  for (std::size_t i = 1; i < table.size(); ++i) {
    const double mi = table[i].second;
    const double mb = table[best].second;
    if (mi < mb || (mi == mb && units(table[i].first) < units(table[best].first))) best = i;
  }
  return table[best].first;
}

ArchSelection SelectArchitecture(const std::vector<ArchCandidate>& candidates,
                                 const Eigen::MatrixXd& data, const DbnTrainConfig& cfg,
                                 const ArchEvaluator& evaluate) {
  if (candidates.empty()) throw Error(ErrorCode::kEmptyCandidates, "no architecture candidates");
  if (data.rows() < 2) throw Error(ErrorCode::kEmptyData, "architecture search needs >= 2 rows");

  Rng rng(MixSeed(cfg.seed, kStreamArchSearch));
  const auto order = Permutation(data.rows(), rng);
  const auto n = static_cast<std::size_t>(data.rows());
  const std::size_t n_train = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(0.9 * static_cast<double>(n))), 1, n - 1);
  const Eigen::MatrixXd train = GatherRows(data, order, 0, n_train);
  const Eigen::MatrixXd held_out = GatherRows(data, order, n_train, n);

  ArchEvaluator eval = evaluate;
  if (!eval) {
    eval = [&cfg](const ArchCandidate& arch, const Eigen::MatrixXd& tr, const Eigen::MatrixXd& ho) {
      DbnModel m = TrainDbn(tr, arch, cfg);
      m = FineTune(m, tr, cfg);
      return Msre(m, ho);
    };
  }

  ArchSelection sel;
  for (const auto& arch : candidates) {
    const double score = eval(arch, train, held_out);
    log::Info("architecture " + FormatArch(arch) + ": held-out MSRE " + std::to_string(score));
    sel.table.emplace_back(arch, score);
  }
  sel.best = PickBestArchitecture(sel.table);
  return sel;
}

}  // namespace assr
