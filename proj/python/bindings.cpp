#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

#include "assr/config.hpp"
#include "assr/error.hpp"
#include "assr/eval.hpp"
#include "assr/pipeline.hpp"
#include "assr/synth.hpp"
#include "assr/tf_features.hpp"

namespace py = pybind11;
using namespace assr;

namespace {

AssrConfig ConfigOrDefault(const std::optional<std::string>& path) {
  return path ? LoadConfig(*path) : AssrConfig{};
}

Stage ToStage(const std::string& name) {
  const auto s = ParseStageName(name);
  if (!s) throw Error(ErrorCode::kInvalidConfig, "unknown stage name: " + name);
  return *s;
}

std::vector<Stage> ToStages(const std::vector<std::string>& names) {
  std::vector<Stage> out;
  for (const auto& n : names) out.push_back(ToStage(n));
  return out;
}

py::dict ConfusionDict(const ConfusionMatrix& cm) {
  py::dict d;
  std::vector<std::string> classes;
  for (Stage s : kClasses) classes.emplace_back(StageName(s));
  d["classes"] = classes;
  d["counts"] = cm.counts;
  d["row_percent"] = cm.row_percent;
  d["total_accuracy"] = cm.total_accuracy;
  return d;
}

py::list PredictionList(const std::vector<EpochPrediction>& preds) {
  py::list out;
  for (const auto& p : preds) {
    py::dict d;
    d["epoch_index"] = p.epoch_index;
    d["label"] = std::string(StageName(p.label));
    std::vector<std::string> subs;
    for (Stage s : p.sub_epoch_labels) subs.emplace_back(StageName(s));
    d["sub_epoch_labels"] = subs;
    d["truth"] = p.truth ? py::object(py::str(std::string(StageName(*p.truth)))) : py::none();
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_assr, m) {
  m.doc() = "Single-channel EEG sleep stage classification";

  py::register_exception<Error>(m, "AssrError", PyExc_RuntimeError);

  m.def("stage_names", [] {
    std::vector<std::string> names;
    for (Stage s : kClasses) names.emplace_back(StageName(s));
    return names;
  });

  m.def("tf_feature_names", [] {
    const auto& names = TfFeatureNames();
    return std::vector<std::string>(names.begin(), names.end());
  });

  m.def(
      "extract_tf",
      [](const std::vector<double>& sub_epoch, double fs) {
        const TfFeatureVector f = ExtractTf(sub_epoch, FeatureConfig{}, fs);
        return std::vector<double>(f.values.begin(), f.values.end());
      },
      py::arg("sub_epoch"), py::arg("fs") = 64.0);

  m.def(
      "confusion",
      [](const std::vector<std::string>& predicted, const std::vector<std::string>& truth) {
        return ConfusionDict(ComputeConfusion(ToStages(predicted), ToStages(truth)));
      },
      py::arg("predicted"), py::arg("truth"));

  m.def(
      "ensemble_vote",
      [](const std::string& gp, const std::string& rf, const std::string& hmm) {
        return std::string(StageName(EnsembleVote(ToStage(gp), ToStage(rf), ToStage(hmm))));
      },
      py::arg("gp"), py::arg("rf"), py::arg("hmm"));

  m.def(
      "synth",
      [](const std::string& out_dir, int patients, int epochs, uint64_t seed) {
        SynthConfig cfg;
        cfg.n_patients = patients;
        cfg.epochs_per_patient = epochs;
        cfg.seed = seed;
        return ManifestToJson(SynthGenerate(cfg, out_dir));
      },
      py::arg("out_dir"), py::arg("patients") = 13, py::arg("epochs") = 240, py::arg("seed") = 0,
      "Writes a synthetic dataset and returns its manifest as JSON text.");

  m.def("default_config", [] { return ConfigToJson(AssrConfig{}); });

  m.def(
      "train",
      [](const std::string& manifest, const std::string& out_dir, const std::optional<std::string>& config,
         uint64_t seed) {
        const AssrConfig cfg = ConfigOrDefault(config);
        const DatasetManifest split = ResolveSplit(LoadManifest(manifest), cfg, seed);
        py::gil_scoped_release release;
        SaveBundle(TrainAll(split, cfg, seed), out_dir);
      },
      py::arg("manifest"), py::arg("out_dir"), py::arg("config") = std::nullopt, py::arg("seed") = 0);

  m.def(
      "classify",
      [](const std::string& bundle_dir, const std::string& record, const std::optional<std::string>& hypnogram) {
        const ModelBundle bundle = LoadBundle(bundle_dir);
        const Recording rec = LoadEegChannel(record, bundle.config.pipeline);
        std::optional<Hypnogram> hyp;
        if (hypnogram) hyp = ParseHypnogram(ReadTextFile(*hypnogram), bundle.config.pipeline.stage_mapping);
        return PredictionList(ClassifyRecording(bundle, rec, hyp ? &*hyp : nullptr));
      },
      py::arg("bundle_dir"), py::arg("record"), py::arg("hypnogram") = std::nullopt);

  m.def(
      "evaluate",
      [](const std::string& manifest, const std::optional<std::string>& config, uint64_t seed, bool ablation) {
        const AssrConfig cfg = ConfigOrDefault(config);
        ExperimentOptions options;
        options.ablation = ablation;
        const DatasetManifest loaded = LoadManifest(manifest);
        ExperimentReport report;
        {
          py::gil_scoped_release release;
          report = RunExperiment(loaded, cfg, seed, options);
        }
        return py::make_tuple(FormatReportText(report), ReportToJson(report));
      },
      py::arg("manifest"), py::arg("config") = std::nullopt, py::arg("seed") = 0, py::arg("ablation") = false,
      "Runs the train/test protocol; returns (text report, JSON report).");
}
