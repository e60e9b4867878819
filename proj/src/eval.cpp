#include "assr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "assr/error.hpp"
#include "assr/log.hpp"
#include "assr/random.hpp"
#include "json.hpp"

namespace assr {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

long ConfusionMatrix::total() const {
  long n = 0;
  for (const auto& row : counts) {
    for (long c : row) n += c;
  }
  return n;
}

long ConfusionMatrix::row_total(Stage truth) const {
  long n = 0;
  for (long c : counts[ClassIndex(truth)]) n += c;
  return n;
}

double ConfusionMatrix::ClassAccuracy(Stage s) const { return row_percent[ClassIndex(s)][ClassIndex(s)]; }

ConfusionMatrix ConfusionFromCounts(const std::array<std::array<long, kNumClasses>, kNumClasses>& counts) {
  ConfusionMatrix cm;
  cm.counts = counts;
  const long n = cm.total();
  if (n == 0) throw Error(ErrorCode::kEmpty, "confusion matrix has no entries");
  long correct = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    correct += counts[t][t];
    const long row = cm.row_total(ClassAt(t));
    for (std::size_t p = 0; p < kNumClasses; ++p) {
      cm.row_percent[t][p] = row > 0 ? 100.0 * static_cast<double>(counts[t][p]) / static_cast<double>(row) : 0.0;
    }
  }
  cm.total_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(n);
  return cm;
}

ConfusionMatrix ComputeConfusion(std::span<const Stage> predicted, std::span<const Stage> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kLengthMismatch, "predicted and true label sequences differ in length");
  }
  if (truth.empty()) throw Error(ErrorCode::kEmpty, "no labels to compare");
  std::array<std::array<long, kNumClasses>, kNumClasses> counts{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (!IsClass(truth[i]) || !IsClass(predicted[i])) {
      throw Error(ErrorCode::kExcludedLabel, "confusion matrix labels must be stage classes");
    }
    ++counts[ClassIndex(truth[i])][ClassIndex(predicted[i])];
  }
  return ConfusionFromCounts(counts);
}

namespace {

struct TestRecording {
  std::string patient_id;
  PreparedRecording prepared;
};

// Method index 0..2 picks a single classifier, 3 the ensemble.
Stage MethodLabel(const EpochPrediction& p, std::size_t method) {
  return method < 3 ? p.method_labels[method] : p.label;
}

ConfusionMatrix PooledConfusion(const std::vector<PatientResult>& patients, std::size_t method) {
  std::vector<Stage> pred, truth;
  for (const auto& r : patients) {
    for (const auto& p : r.evaluated) {
      pred.push_back(MethodLabel(p, method));
      truth.push_back(*p.truth);
    }
  }
  return ComputeConfusion(pred, truth);
}

std::vector<PatientResult> ClassifyTests(const ModelBundle& bundle, const std::vector<TestRecording>& tests,
                                         bool remove_transitions) {
  std::vector<PatientResult> out;
  for (const auto& t : tests) {
    PatientResult r;
    r.patient_id = t.patient_id;
    r.all_epochs = ClassifyPrepared(bundle, t.prepared);
    r.evaluated = EvaluableEpochs(r.all_epochs, remove_transitions);
    out.push_back(std::move(r));
  }
  return out;
}

std::string Fixed(double v, int decimals = 2) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string PadLeft(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string PadRight(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string JoinIds(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : " ") + id;
  return out;
}

Json ConfusionJson(const ConfusionMatrix& cm) {
  Json classes = Json::array();
  for (Stage s : kClasses) classes.push_back(std::string(StageName(s)));
  return {{"classes", classes},
          {"counts", cm.counts},
          {"row_percent", cm.row_percent},
          {"total_accuracy", cm.total_accuracy},
          {"epochs", cm.total()}};
}

}  // namespace

DatasetManifest ResolveSplit(const DatasetManifest& manifest, const AssrConfig& cfg, uint64_t seed) {
  if (manifest.split) return manifest;
  return SplitPatients(manifest, static_cast<std::size_t>(cfg.experiment.n_train),
                       static_cast<std::size_t>(cfg.experiment.n_test), MixSeed(seed, kStreamSplit));
}

ExperimentReport RunExperiment(const DatasetManifest& manifest, AssrConfig cfg, uint64_t seed,
                               const ExperimentOptions& options) {
  ApplySeed(cfg, seed);
  ValidateConfig(cfg);
  ValidateManifest(manifest);
  const DatasetManifest split = ResolveSplit(manifest, cfg, seed);
  if (split.split->test_ids.empty()) throw Error(ErrorCode::kInvalidConfig, "experiment needs test patients");

  ExperimentReport report;
  report.seed = seed;
  report.train_ids = split.split->train_ids;
  report.test_ids = split.split->test_ids;
  report.feature_set = cfg.pipeline.feature_set;
  report.transitions_removed = cfg.preprocess.remove_transitions_on_test;

  const TrainingCorpus corpus = BuildTrainingCorpus(split, report.train_ids, cfg);
  report.training_epochs = corpus.selected.size();
  const bool need_dbn = options.ablation || cfg.pipeline.feature_set != FeatureSet::kTf;
  std::optional<DbnModel> dbn;
  if (need_dbn) {
    DbnTraining trained = TrainFeatureDbn(corpus, cfg);
    report.search = std::move(trained.search);
    dbn = std::move(trained.model);
  }

  const ModelBundle main = TrainClassifiers(corpus, cfg, cfg.pipeline.feature_set, dbn, seed);

  // Test recordings are read only once the models they are scored with exist.
  std::vector<TestRecording> tests;
  for (const auto& id : report.test_ids) {
    const ManifestEntry& entry = split.Find(id);
    Recording rec = LoadEegChannel(entry.signal_path, cfg.pipeline);
    rec.patient_id = id;
    const Hypnogram hyp = ParseHypnogram(ReadTextFile(entry.hypnogram_path), cfg.pipeline.stage_mapping);
    tests.push_back({id, PrepareRecording(rec, &hyp, cfg)});
  }

  report.feature_dim = static_cast<int>(main.standardization.dim());
  if (main.dbn) report.architecture = main.dbn->architecture();
  report.rf_oob_accuracy = main.rf.oob_accuracy;
  report.patients = ClassifyTests(main, tests, report.transitions_removed);
  report.ensemble = PooledConfusion(report.patients, 3);
  for (std::size_t m = 0; m < 3; ++m) report.methods[m] = PooledConfusion(report.patients, m);

  if (options.ablation) {
    for (FeatureSet set : {FeatureSet::kTf, FeatureSet::kUnsup, FeatureSet::kJoint}) {
      AblationRow row;
      row.set = set;
      std::vector<PatientResult> results;
      if (set == cfg.pipeline.feature_set) {
        row.dim = report.feature_dim;
        results = report.patients;
      } else {
        const ModelBundle b = TrainClassifiers(corpus, cfg, set, dbn, seed);
        row.dim = static_cast<int>(b.standardization.dim());
        results = ClassifyTests(b, tests, report.transitions_removed);
      }
      for (std::size_t m = 0; m < 4; ++m) row.accuracy[m] = PooledConfusion(results, m).total_accuracy;
      log::Info("ablation " + FeatureSetName(set) + ": ensemble " + Fixed(row.accuracy[3]));
      report.ablation.push_back(row);
    }
  }
  return report;
}

std::string FormatConfusionTable(const ConfusionMatrix& cm) {
  std::string out = PadRight("% Classified", 14);
  for (Stage s : kClasses) out += PadLeft(std::string(StageName(s)), 9);
  out += PadLeft("epochs", 9) + "\n";
  for (Stage t : kClasses) {
    out += PadRight(std::string(StageName(t)), 14);
    for (Stage p : kClasses) out += PadLeft(Fixed(cm.row_percent[ClassIndex(t)][ClassIndex(p)]), 9);
    out += PadLeft(std::to_string(cm.row_total(t)), 9) + "\n";
  }
  out += "Total accuracy: " + Fixed(cm.total_accuracy) + "\n";
  return out;
}

std::string FormatReportText(const ExperimentReport& r) {
  std::string out;
  out += "Sleep stage recognition report\n";
  out += "seed: " + std::to_string(r.seed) + "\n";
  out += "train patients (" + std::to_string(r.train_ids.size()) + "): " + JoinIds(r.train_ids) + "\n";
  out += "test patients (" + std::to_string(r.test_ids.size()) + "): " + JoinIds(r.test_ids) + "\n";
  out += "features: " + FeatureSetName(r.feature_set) + " (" + std::to_string(r.feature_dim) + ")\n";
  if (!r.architecture.empty()) out += "DBN architecture: " + FormatArch(r.architecture) + "\n";
  if (r.search) {
    out += "\nArchitecture search (held-out MSRE)\n";
    for (const auto& [arch, msre] : r.search->table) {
      out += "  " + PadRight(FormatArch(arch), 44) + Fixed(msre, 6) + (arch == r.search->best ? "  *" : "") + "\n";
    }
  }
  out += "training epochs (balanced): " + std::to_string(r.training_epochs) + "\n";
  out += "transition epochs removed from test: " + std::string(r.transitions_removed ? "yes" : "no") + "\n";
  out += "evaluated test epochs: " + std::to_string(r.ensemble.total()) + "\n";

  out += "\nConfusion matrix, ensemble (rows: reference stage, % of row)\n";
  out += FormatConfusionTable(r.ensemble);

  out += "\nPer-class accuracy (%)\n";
  out += PadRight("method", 14);
  for (Stage s : kClasses) out += PadLeft(std::string(StageName(s)), 9);
  out += PadLeft("total", 9) + "\n";
  for (std::size_t m = 0; m < 4; ++m) {
    const ConfusionMatrix& cm = m < 3 ? r.methods[m] : r.ensemble;
    out += PadRight(kMethodNames[m], 14);
    for (Stage s : kClasses) out += PadLeft(Fixed(cm.ClassAccuracy(s)), 9);
    out += PadLeft(Fixed(cm.total_accuracy), 9) + "\n";
  }

  out += "\nPer-patient ensemble accuracy (%)\n";
  for (const auto& p : r.patients) {
    long correct = 0;
    for (const auto& e : p.evaluated) correct += e.label == *e.truth ? 1 : 0;
    const double acc = p.evaluated.empty() ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(p.evaluated.size());
    out += "  " + PadRight(p.patient_id, 12) + PadLeft(Fixed(acc), 9) + "  (" + std::to_string(p.evaluated.size()) +
           " epochs)\n";
  }

  if (!r.ablation.empty()) {
    out += "\nFeature-set comparison (total accuracy, %)\n";
    out += PadRight("features", 14) + PadLeft("dim", 5);
    for (const char* m : kMethodNames) out += PadLeft(m, 10);
    out += "\n";
    for (const auto& row : r.ablation) {
      out += PadRight(FeatureSetName(row.set), 14) + PadLeft(std::to_string(row.dim), 5);
      for (double a : row.accuracy) out += PadLeft(Fixed(a), 10);
      out += "\n";
    }
  }
  return out;
}

std::string ReportToJson(const ExperimentReport& r) {
  Json doc;
  doc["format"] = "assr-report";
  doc["version"] = 1;
  doc["seed"] = r.seed;
  doc["train_ids"] = r.train_ids;
  doc["test_ids"] = r.test_ids;
  doc["feature_set"] = FeatureSetName(r.feature_set);
  doc["feature_dim"] = r.feature_dim;
  doc["architecture"] = r.architecture;
  if (r.search) {
    Json table = Json::array();
    for (const auto& [arch, msre] : r.search->table) table.push_back({{"architecture", arch}, {"msre", msre}});
    doc["architecture_search"] = {{"best", r.search->best}, {"table", table}};
  }
  doc["transitions_removed"] = r.transitions_removed;
  doc["training_epochs"] = r.training_epochs;
  doc["rf_oob_accuracy"] = std::isfinite(r.rf_oob_accuracy) ? Json(r.rf_oob_accuracy) : Json(nullptr);
  doc["ensemble"] = ConfusionJson(r.ensemble);
  for (std::size_t m = 0; m < 3; ++m) doc["methods"][kMethodNames[m]] = ConfusionJson(r.methods[m]);
  Json patients = Json::array();
  for (const auto& p : r.patients) {
    Json pred = Json::array(), truth = Json::array(), index = Json::array();
    for (const auto& e : p.evaluated) {
      index.push_back(e.epoch_index);
      pred.push_back(std::string(StageName(e.label)));
      truth.push_back(std::string(StageName(*e.truth)));
    }
    patients.push_back({{"patient_id", p.patient_id}, {"epoch_index", index}, {"predicted", pred}, {"true", truth}});
  }
  doc["patients"] = patients;
  if (!r.ablation.empty()) {
    Json rows = Json::array();
    for (const auto& row : r.ablation) {
      Json acc;
      for (std::size_t m = 0; m < 4; ++m) acc[kMethodNames[m]] = row.accuracy[m];
      rows.push_back({{"feature_set", FeatureSetName(row.set)}, {"dim", row.dim}, {"accuracy", acc}});
    }
    doc["ablation"] = rows;
  }
  return doc.dump(2) + "\n";
}

std::string HypnogramSvg(const PatientResult& patient) {
  // Conventional hypnogram order, top to bottom.
  const std::array<Stage, kNumClasses> order = {Stage::kAwake, Stage::kRem, Stage::kNrem1, Stage::kNrem2,
                                                Stage::kSws};
  auto level = [&](Stage s) {
    return static_cast<int>(std::find(order.begin(), order.end(), s) - order.begin());
  };
  const auto& epochs = patient.all_epochs;
  const int left = 60, row_h = 18, trace_h = row_h * 5, gap = 30;
  const double step = 2.0;
  const int width = left + static_cast<int>(step * static_cast<double>(std::max<std::size_t>(epochs.size(), 1))) + 10;
  const int height = 2 * trace_h + gap + 40;
  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
                    std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  out += "<text x=\"4\" y=\"12\">" + patient.patient_id + "</text>\n";
  for (int trace = 0; trace < 2; ++trace) {
    const int top = 20 + trace * (trace_h + gap);
    out += "<text x=\"4\" y=\"" + std::to_string(top - 4) + "\">" + (trace == 0 ? "reference" : "predicted") +
           "</text>\n";
    for (std::size_t k = 0; k < order.size(); ++k) {
      out += "<text x=\"4\" y=\"" + std::to_string(top + static_cast<int>(k) * row_h + 12) + "\">" +
             std::string(StageName(order[k])) + "</text>\n";
    }
    std::string path;
    bool pen = false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      std::optional<Stage> s = trace == 0 ? epochs[i].truth : std::optional<Stage>(epochs[i].label);
      if (!s) {
        pen = false;
        continue;
      }
      const double x0 = left + step * static_cast<double>(i);
      const int y = top + level(*s) * row_h + row_h / 2;
      path += (pen ? " L" : " M") + Fixed(x0, 1) + " " + std::to_string(y) + " L" + Fixed(x0 + step, 1) + " " +
              std::to_string(y);
      pen = true;
    }
    out += "<path fill=\"none\" stroke=\"" + std::string(trace == 0 ? "#1f4e79" : "#b03a2e") +
           "\" stroke-width=\"1.2\" d=\"" + path + "\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

DatasetManifest ScanDataDir(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error(ErrorCode::kIoFailure, dir + " is not a directory");
  std::map<std::string, ManifestEntry> found;
  for (const auto& item : fs::directory_iterator(dir)) {
    if (!item.is_regular_file()) continue;
    const fs::path p = item.path();
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext != ".edf" && ext != ".rec") continue;
    const std::string stem = p.stem().string();
    const fs::path hyp = p.parent_path() / (stem + "_stage.txt");
    if (!fs::exists(hyp)) {
      log::Warn(p.string() + ": no " + hyp.filename().string() + ", skipped");
      continue;
    }
    found[stem] = {stem, p.string(), hyp.string()};
  }
  if (found.empty()) throw Error(ErrorCode::kEmpty, "no recordings with hypnograms found in " + dir);
  DatasetManifest m;
  for (auto& [id, entry] : found) m.entries.push_back(std::move(entry));
  return m;
}

}  // namespace assr
