#include "assr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

#include "assr/error.hpp"
#include "assr/log.hpp"

namespace assr {

std::vector<double> JoinFeatures(const TfFeatureVector& tf, std::span<const double> unsup, std::size_t unsup_dim) {
  if (unsup.size() != unsup_dim) {
    throw Error(ErrorCode::kLengthMismatch, "expected " + std::to_string(unsup_dim) +
                                                " unsupervised features, got " + std::to_string(unsup.size()));
  }
  std::vector<double> out(tf.values.begin(), tf.values.end());
  out.insert(out.end(), unsup.begin(), unsup.end());
  return out;
}

StandardizationStats FitStandardization(const Eigen::MatrixXd& X) {
  if (X.rows() == 0 || X.cols() == 0) throw Error(ErrorCode::kEmptyData, "no rows to standardize");
  StandardizationStats stats;
  const double n = static_cast<double>(X.rows());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double mean = X.col(j).sum() / n;
    const double var = (X.col(j).array() - mean).square().sum() / n;
    stats.mean.push_back(mean);
    stats.std.push_back(std::max(std::sqrt(var), kStdFloor));
  }
  return stats;
}

std::vector<double> Standardize(const StandardizationStats& stats, std::span<const double> x) {
  if (x.size() != stats.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "standardization expects " + std::to_string(stats.dim()) +
                                                   " features, got " + std::to_string(x.size()));
  }
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = stats.std[j] > kStdFloor ? (x[j] - stats.mean[j]) / stats.std[j] : 0.0;
  }
  return out;
}

Eigen::MatrixXd StandardizeRows(const StandardizationStats& stats, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != stats.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "standardization expects " + std::to_string(stats.dim()) +
                                                   " features, got " + std::to_string(X.cols()));
  }
  Eigen::MatrixXd out(X.rows(), X.cols());
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const auto k = static_cast<std::size_t>(j);
    if (stats.std[k] > kStdFloor) {
      out.col(j) = (X.col(j).array() - stats.mean[k]) / stats.std[k];
    } else {
      out.col(j).setZero();
    }
  }
  return out;
}

Stage EnsembleVote(Stage gp, Stage rf, Stage hmm) {
  if (rf == hmm) return rf;
  return gp;
}

Stage EnsembleVote(const Prediction& gp, const Prediction& rf, Stage hmm_label) {
  return EnsembleVote(gp.label, rf.label, hmm_label);
}

EpochPrediction AggregateEpoch(std::span<const Stage> sub_labels, std::span<const ClassProbabilities> gp_probs) {
  if (sub_labels.size() != kSubEpochsPerEpoch || gp_probs.size() != kSubEpochsPerEpoch) {
    throw Error(ErrorCode::kWrongCount, "epoch aggregation needs exactly 5 sub-epoch results, got " +
                                            std::to_string(sub_labels.size()) + " labels and " +
                                            std::to_string(gp_probs.size()) + " probability vectors");
  }
  EpochPrediction out;
  std::array<int, kNumClasses> votes{};
  for (std::size_t s = 0; s < kSubEpochsPerEpoch; ++s) {
    if (!IsClass(sub_labels[s])) throw Error(ErrorCode::kExcludedLabel, "sub-epoch label is not a stage class");
    out.sub_epoch_labels[s] = sub_labels[s];
    ++votes[ClassIndex(sub_labels[s])];
    for (std::size_t c = 0; c < kNumClasses; ++c) out.gp_probability_sums[c] += gp_probs[s][c];
  }
  const int top = *std::max_element(votes.begin(), votes.end());
  std::size_t best = kNumClasses;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    if (votes[c] != top) continue;
    if (best == kNumClasses || out.gp_probability_sums[c] > out.gp_probability_sums[best]) best = c;
  }
  out.label = ClassAt(best);
  return out;
}

Recording LoadEegChannel(const std::string& edf_path, const PipelineConfig& cfg) {
  const auto bytes = ReadFileBytes(edf_path);
  auto [header, recordings] = ParseEdf(bytes);
  std::vector<std::string> wanted = {cfg.channel};
  wanted.insert(wanted.end(), cfg.channel_aliases.begin(), cfg.channel_aliases.end());
  for (const auto& label : wanted) {
    try {
      Recording rec = SelectChannel(recordings, label);
      if (rec.samples.empty()) throw Error(ErrorCode::kEmptyInput, edf_path + ": channel " + label + " has no samples");
      return rec;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kChannelNotFound) throw;
    }
  }
  std::string available;
  for (const auto& r : recordings) available += (available.empty() ? "" : ", ") + r.channel_label;
  throw Error(ErrorCode::kChannelNotFound,
              edf_path + ": no channel '" + cfg.channel + "' or alias (available: " + available + ")");
}

PreparedRecording PrepareRecording(const Recording& rec, const Hypnogram* hyp, const AssrConfig& cfg) {
  PreparedRecording out;
  out.patient_id = rec.patient_id;
  const auto signal = PreprocessSignal(rec.samples, rec.fs, cfg.preprocess);
  out.stats = ComputeRecordingStats(signal);
  Segmentation seg = hyp != nullptr ? Segment(signal, *hyp, rec.patient_id, cfg.preprocess.target_fs)
                                    : SegmentUnlabeled(signal, rec.patient_id, cfg.preprocess.target_fs);
  out.epochs = std::move(seg.epochs);
  for (auto& e : out.epochs) {
    if (e.label != Stage::kExcluded) e.label = MergeStage(e.label);
  }
  return out;
}

std::size_t FeatureDim(FeatureSet set, std::size_t unsup_dim) {
  switch (set) {
    case FeatureSet::kTf: return kNumTfFeatures;
    case FeatureSet::kUnsup: return unsup_dim;
    case FeatureSet::kJoint: return kNumTfFeatures + unsup_dim;
  }
  return 0;
}

Eigen::MatrixXd SubEpochFeatures(const std::vector<Epoch>& epochs, const RecordingStats& stats,
                                 const AssrConfig& cfg, FeatureSet set, const DbnModel* dbn) {
  const bool use_tf = set != FeatureSet::kUnsup;
  const bool use_unsup = set != FeatureSet::kTf;
  if (use_unsup && dbn == nullptr) throw Error(ErrorCode::kInvalidConfig, "feature set needs a DBN");
  const std::size_t unsup_dim = use_unsup ? static_cast<std::size_t>(dbn->feature_dim()) : 0;
  const auto n = static_cast<Eigen::Index>(epochs.size() * kSubEpochsPerEpoch);

  Eigen::MatrixXd unsup;
  if (use_unsup) {
    Eigen::MatrixXd scaled(n, static_cast<Eigen::Index>(kSubEpochSamples));
    Eigen::Index row = 0;
    for (const auto& e : epochs) {
      for (std::size_t s = 0; s < kSubEpochsPerEpoch; ++s, ++row) {
        const std::span<const double> slice(e.samples.data() + s * kSubEpochSamples, kSubEpochSamples);
        const auto v = ScaleInput(stats, dbn->input_scaling, slice);
        scaled.row(row) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
    }
    unsup = EncodeBatch(*dbn, scaled);
  }

  Eigen::MatrixXd out(n, static_cast<Eigen::Index>(FeatureDim(set, unsup_dim)));
  Eigen::Index row = 0;
  for (const auto& e : epochs) {
    for (std::size_t s = 0; s < kSubEpochsPerEpoch; ++s, ++row) {
      Eigen::Index col = 0;
      if (use_tf) {
        const std::span<const double> slice(e.samples.data() + s * kSubEpochSamples, kSubEpochSamples);
        const TfFeatureVector tf = ExtractTf(slice, cfg.features, cfg.preprocess.target_fs);
        if (tf.flags != kFlagNone) {
          log::Info(e.patient_id + " epoch " + std::to_string(e.epoch_index) + " slot " + std::to_string(s) +
                    ": degenerate sub-epoch (flags " + std::to_string(tf.flags) + ")");
        }
        for (double v : tf.values) out(row, col++) = v;
      }
      if (use_unsup) {
        out.block(row, col, 1, unsup.cols()) = unsup.row(row);
      }
    }
  }
  return out;
}

namespace {

// Runs of consecutive non-Excluded labels, each epoch repeated per sub-epoch.
void AppendLabelRuns(const std::vector<Epoch>& epochs, std::vector<std::vector<Stage>>& runs) {
  std::vector<Stage> current;
  for (const auto& e : epochs) {
    if (e.label == Stage::kExcluded) {
      if (!current.empty()) runs.push_back(std::move(current));
      current.clear();
      continue;
    }
    current.insert(current.end(), kSubEpochsPerEpoch, e.label);
  }
  if (!current.empty()) runs.push_back(std::move(current));
}

// Selected epochs grouped by recording, in corpus order.
std::vector<std::vector<Epoch>> SelectedByRecording(const TrainingCorpus& corpus) {
  std::vector<std::vector<Epoch>> out(corpus.recordings.size());
  for (const auto& [r, e] : corpus.selected) out[r].push_back(corpus.recordings[r].epochs[e]);
  return out;
}

}  // namespace

TrainingCorpus BuildTrainingCorpus(const DatasetManifest& manifest, const std::vector<std::string>& train_ids,
                                   const AssrConfig& cfg) {
  if (train_ids.empty()) throw Error(ErrorCode::kInvalidConfig, "training split is empty");
  TrainingCorpus corpus;
  std::vector<std::pair<std::size_t, std::size_t>> candidates;
  std::vector<Stage> labels;
  for (const auto& id : train_ids) {
    const ManifestEntry& entry = manifest.Find(id);
    Recording rec = LoadEegChannel(entry.signal_path, cfg.pipeline);
    rec.patient_id = id;
    const Hypnogram hyp = ParseHypnogram(ReadTextFile(entry.hypnogram_path), cfg.pipeline.stage_mapping);
    PreparedRecording prepared = PrepareRecording(rec, &hyp, cfg);
    AppendLabelRuns(prepared.epochs, corpus.label_sequences);

    std::vector<Stage> rec_labels;
    for (const auto& e : prepared.epochs) rec_labels.push_back(e.label);
    const auto keep = TransitionKeepMask(rec_labels);
    const std::size_t r = corpus.recordings.size();
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) continue;
      candidates.emplace_back(r, i);
      labels.push_back(rec_labels[i]);
    }
    log::Info(id + ": " + std::to_string(prepared.epochs.size()) + " epochs, " +
              std::to_string(std::count(keep.begin(), keep.end(), true)) + " kept after transition removal");
    corpus.recordings.push_back(std::move(prepared));
  }
  for (std::size_t i : BalancedSelection(labels, cfg.preprocess.balance_seed)) {
    corpus.selected.push_back(candidates[i]);
  }
  log::Info("balanced training set: " + std::to_string(corpus.selected.size()) + " epochs");
  return corpus;
}

Eigen::MatrixXd DbnInputMatrix(const TrainingCorpus& corpus, const AssrConfig& cfg) {
  Eigen::MatrixXd data(static_cast<Eigen::Index>(corpus.selected.size() * kSubEpochsPerEpoch),
                       static_cast<Eigen::Index>(kSubEpochSamples));
  Eigen::Index row = 0;
  for (const auto& [r, e] : corpus.selected) {
    const auto& rec = corpus.recordings[r];
    const auto& samples = rec.epochs[e].samples;
    for (std::size_t s = 0; s < kSubEpochsPerEpoch; ++s, ++row) {
      const std::span<const double> slice(samples.data() + s * kSubEpochSamples, kSubEpochSamples);
      const auto v = ScaleInput(rec.stats, cfg.dbn.scaling, slice);
      data.row(row) = Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
    }
  }
  return data;
}

DbnTraining TrainFeatureDbn(const TrainingCorpus& corpus, const AssrConfig& cfg) {
  const Eigen::MatrixXd data = DbnInputMatrix(corpus, cfg);
  DbnTraining out;
  ArchCandidate arch = cfg.dbn.architecture;
  if (cfg.dbn.architecture_search) {
    out.search = SelectArchitecture(cfg.dbn.candidates, data, cfg.dbn.train);
    arch = out.search->best;
    log::Info("selected architecture " + FormatArch(arch));
  }
  DbnModel model = TrainDbn(data, arch, cfg.dbn.train, [](std::size_t layer, int epoch, double msre) {
    if (log::GetLevel() >= log::Level::kInfo && (epoch + 1) % 10 == 0) {
      log::Info("DBN layer " + std::to_string(layer) + " epoch " + std::to_string(epoch + 1) +
                " msre " + std::to_string(msre));
    }
  });
  model.input_scaling = cfg.dbn.scaling;
  out.model = FineTune(model, data, cfg.dbn.train, &out.fine_tune_msre);
  out.model.input_scaling = cfg.dbn.scaling;
  if (!out.fine_tune_msre.empty()) {
    log::Info("fine-tuning msre " + std::to_string(out.fine_tune_msre.front()) + " -> " +
              std::to_string(out.fine_tune_msre.back()));
  }
  return out;
}

ModelBundle TrainClassifiers(const TrainingCorpus& corpus, const AssrConfig& cfg, FeatureSet set,
                             const std::optional<DbnModel>& dbn, uint64_t seed) {
  if (corpus.selected.empty()) throw Error(ErrorCode::kEmptyData, "no training epochs selected");
  const DbnModel* dbn_ptr = dbn ? &*dbn : nullptr;
  const auto grouped = SelectedByRecording(corpus);
  std::vector<Eigen::MatrixXd> blocks;
  std::vector<Stage> y;
  Eigen::Index rows = 0;
  for (std::size_t r = 0; r < grouped.size(); ++r) {
    if (grouped[r].empty()) continue;
    blocks.push_back(SubEpochFeatures(grouped[r], corpus.recordings[r].stats, cfg, set, dbn_ptr));
    rows += blocks.back().rows();
    for (const auto& e : grouped[r]) y.insert(y.end(), kSubEpochsPerEpoch, e.label);
  }
  Eigen::MatrixXd X(rows, blocks.front().cols());
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    X.middleRows(at, b.rows()) = b;
    at += b.rows();
  }

  ModelBundle bundle;
  bundle.seed = seed;
  bundle.config = cfg;
  bundle.config.pipeline.feature_set = set;
  bundle.feature_set = set;
  if (set != FeatureSet::kTf) bundle.dbn = dbn;
  bundle.standardization = FitStandardization(X);
  const Eigen::MatrixXd Xs = StandardizeRows(bundle.standardization, X);
  log::Info("training classifiers on " + std::to_string(Xs.rows()) + " sub-epochs x " +
            std::to_string(Xs.cols()) + " features (" + FeatureSetName(set) + ")");
  bundle.gp = TrainGp(Xs, y, cfg.gp);
  bundle.rf = TrainRf(Xs, y, cfg.rf);
  bundle.hmm = TrainHmm(corpus.label_sequences, Xs, y);
  return bundle;
}

ModelBundle TrainAll(const DatasetManifest& manifest, AssrConfig cfg, uint64_t seed, DbnTraining* dbn_info) {
  ApplySeed(cfg, seed);
  ValidateConfig(cfg);
  ValidateManifest(manifest);
  if (!manifest.split || manifest.split->train_ids.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "training needs a manifest split with at least one training patient");
  }
  const TrainingCorpus corpus = BuildTrainingCorpus(manifest, manifest.split->train_ids, cfg);
  const FeatureSet set = cfg.pipeline.feature_set;
  std::optional<DbnModel> dbn;
  if (set != FeatureSet::kTf) {
    DbnTraining trained = TrainFeatureDbn(corpus, cfg);
    dbn = trained.model;
    if (dbn_info != nullptr) *dbn_info = std::move(trained);
  }
  return TrainClassifiers(corpus, cfg, set, dbn, seed);
}

std::vector<EpochPrediction> ClassifyPrepared(const ModelBundle& bundle, const PreparedRecording& rec) {
  std::vector<EpochPrediction> out;
  if (rec.epochs.empty()) return out;
  const DbnModel* dbn = bundle.dbn ? &*bundle.dbn : nullptr;
  const Eigen::MatrixXd X =
      StandardizeRows(bundle.standardization,
                      SubEpochFeatures(rec.epochs, rec.stats, bundle.config, bundle.feature_set, dbn));
  const auto gp = PredictGpBatch(bundle.gp, X);
  const std::vector<Stage> hmm = Viterbi(bundle.hmm, X);
  std::vector<Stage> rf(static_cast<std::size_t>(X.rows()));
  std::vector<double> row(static_cast<std::size_t>(X.cols()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(i, j);
    rf[static_cast<std::size_t>(i)] = PredictRf(bundle.rf, row).label;
  }

  out.reserve(rec.epochs.size());
  for (std::size_t e = 0; e < rec.epochs.size(); ++e) {
    std::array<Stage, kSubEpochsPerEpoch> votes{}, gp_labels{}, rf_labels{}, hmm_labels{};
    std::array<ClassProbabilities, kSubEpochsPerEpoch> probs{};
    for (std::size_t s = 0; s < kSubEpochsPerEpoch; ++s) {
      const std::size_t i = e * kSubEpochsPerEpoch + s;
      gp_labels[s] = gp[i].label;
      rf_labels[s] = rf[i];
      hmm_labels[s] = hmm[i];
      votes[s] = EnsembleVote(gp[i].label, rf[i], hmm[i]);
      probs[s] = gp[i].class_probabilities;
    }
    EpochPrediction p = AggregateEpoch(votes, probs);
    p.epoch_index = rec.epochs[e].epoch_index;
    p.method_labels = {AggregateEpoch(gp_labels, probs).label, AggregateEpoch(rf_labels, probs).label,
                       AggregateEpoch(hmm_labels, probs).label};
    if (IsClass(rec.epochs[e].label)) p.truth = rec.epochs[e].label;
    out.push_back(p);
  }
  return out;
}

std::vector<EpochPrediction> EvaluableEpochs(const std::vector<EpochPrediction>& all, bool remove_transitions) {
  std::vector<Stage> labels;
  labels.reserve(all.size());
  for (const auto& p : all) labels.push_back(p.truth.value_or(Stage::kExcluded));
  std::vector<bool> keep;
  if (remove_transitions) {
    keep = TransitionKeepMask(labels);
  } else {
    for (Stage s : labels) keep.push_back(s != Stage::kExcluded);
  }
  std::vector<EpochPrediction> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (keep[i]) out.push_back(all[i]);
  }
  return out;
}

std::vector<EpochPrediction> ClassifyRecording(const ModelBundle& bundle, const Recording& rec, const Hypnogram* hyp) {
  const PreparedRecording prepared = PrepareRecording(rec, hyp, bundle.config);
  auto all = ClassifyPrepared(bundle, prepared);
  if (hyp == nullptr) return all;
  return EvaluableEpochs(all, bundle.config.preprocess.remove_transitions_on_test);
}

std::string FormatPredictionTable(const std::string& patient_id, const std::vector<EpochPrediction>& preds) {
  std::string out = "patient_id,epoch_index,predicted,true,sub0,sub1,sub2,sub3,sub4\n";
  for (const auto& p : preds) {
    out += patient_id + "," + std::to_string(p.epoch_index) + "," + std::string(StageName(p.label)) + ",";
    if (p.truth) out += StageName(*p.truth);
    for (Stage s : p.sub_epoch_labels) out += "," + std::string(StageName(s));
    out += "\n";
  }
  return out;
}

std::string FormatTfFeatureTable(const TrainingCorpus& corpus, const AssrConfig& cfg) {
  std::string out = "patient_id,epoch_index,slot,label";
  for (const auto& name : TfFeatureNames()) out += "," + name;
  out += "\n";
  char buf[32];
  for (const auto& [r, e] : corpus.selected) {
    const auto& rec = corpus.recordings[r];
    const Epoch& epoch = rec.epochs[e];
    for (std::size_t s = 0; s < kSubEpochsPerEpoch; ++s) {
      const std::span<const double> slice(epoch.samples.data() + s * kSubEpochSamples, kSubEpochSamples);
      const TfFeatureVector tf = ExtractTf(slice, cfg.features, cfg.preprocess.target_fs);
      out += rec.patient_id + "," + std::to_string(epoch.epoch_index) + "," + std::to_string(s) + "," +
             std::string(StageName(epoch.label));
      for (double v : tf.values) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out += buf;
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace assr
