#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "assr/config.hpp"
#include "assr/error.hpp"
#include "assr/eval.hpp"
#include "assr/log.hpp"
#include "assr/pipeline.hpp"
#include "assr/random.hpp"
#include "assr/synth.hpp"

namespace fs = std::filesystem;
using namespace assr;

namespace {

AssrConfig ConfigOrDefault(const std::string& path) { return path.empty() ? AssrConfig{} : LoadConfig(path); }

std::string Fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

int Ingest(const std::string& data_dir, const std::string& manifest_path, const std::string& config_path) {
  const AssrConfig cfg = ConfigOrDefault(config_path);
  const DatasetManifest manifest = ScanDataDir(data_dir);
  for (const auto& e : manifest.entries) {
    const Recording rec = LoadEegChannel(e.signal_path, cfg.pipeline);
    const Hypnogram hyp = ParseHypnogram(ReadTextFile(e.hypnogram_path), cfg.pipeline.stage_mapping);
    const double hours = static_cast<double>(rec.samples.size()) / rec.fs / 3600.0;
    std::cout << e.patient_id << ": channel " << rec.channel_label << ", " << rec.fs << " Hz, " << Fixed(hours, 2)
              << " h, " << hyp.stages.size() << " scored epochs\n";
  }
  SaveManifest(manifest, manifest_path);
  std::cout << "wrote " << manifest_path << " (" << manifest.entries.size() << " recordings)\n";
  return 0;
}

int Synth(const std::string& out, int patients, int epochs, uint64_t seed) {
  SynthConfig cfg;
  cfg.n_patients = patients;
  cfg.epochs_per_patient = epochs;
  cfg.seed = seed;
  const DatasetManifest m = SynthGenerate(cfg, out);
  std::cout << "wrote " << m.entries.size() << " synthetic recordings to " << out << "\n";
  return 0;
}

int ArchSearch(const std::string& manifest_path, const std::string& config_path, uint64_t seed,
               const std::string& report_path) {
  AssrConfig cfg = ConfigOrDefault(config_path);
  ApplySeed(cfg, seed);
  ValidateConfig(cfg);
  const DatasetManifest split = ResolveSplit(LoadManifest(manifest_path), cfg, seed);
  const TrainingCorpus corpus = BuildTrainingCorpus(split, split.split->train_ids, cfg);
  const ArchSelection sel = SelectArchitecture(cfg.dbn.candidates, DbnInputMatrix(corpus, cfg), cfg.dbn.train);
  std::string text = "Architecture                                   held-out MSRE\n";
  for (const auto& [arch, msre] : sel.table) {
    std::string name = FormatArch(arch);
    name.resize(std::max<std::size_t>(name.size(), 47), ' ');
    text += name + Fixed(msre, 6) + (arch == sel.best ? "  *" : "") + "\n";
  }
  text += "selected: " + FormatArch(sel.best) + "\n";
  std::cout << text;
  if (!report_path.empty()) WriteTextFile(report_path, text);
  return 0;
}

int Train(const std::string& manifest_path, const std::string& config_path, uint64_t seed, const std::string& out,
          const std::string& dump_features) {
  AssrConfig cfg = ConfigOrDefault(config_path);
  const DatasetManifest split = ResolveSplit(LoadManifest(manifest_path), cfg, seed);
  if (!dump_features.empty()) {
    AssrConfig seeded = cfg;
    ApplySeed(seeded, seed);
    const TrainingCorpus corpus = BuildTrainingCorpus(split, split.split->train_ids, seeded);
    WriteTextFile(dump_features, FormatTfFeatureTable(corpus, seeded));
  }
  const ModelBundle bundle = TrainAll(split, cfg, seed);
  SaveBundle(bundle, out);
  std::cout << "trained on " << split.split->train_ids.size() << " patients, " << bundle.standardization.dim()
            << " features; bundle written to " << out << "\n";
  return 0;
}

int Classify(const std::string& bundle_dir, const std::string& record, const std::string& hyp_path,
             const std::string& out) {
  const ModelBundle bundle = LoadBundle(bundle_dir);
  Recording rec = LoadEegChannel(record, bundle.config.pipeline);
  const std::string id = fs::path(record).stem().string();
  rec.patient_id = id;
  std::optional<Hypnogram> hyp;
  if (!hyp_path.empty()) hyp = ParseHypnogram(ReadTextFile(hyp_path), bundle.config.pipeline.stage_mapping);
  const auto preds = ClassifyRecording(bundle, rec, hyp ? &*hyp : nullptr);
  WriteTextFile(out, FormatPredictionTable(id, preds));
  std::cout << "classified " << preds.size() << " epochs of " << id;
  if (hyp) {
    long correct = 0;
    for (const auto& p : preds) correct += p.label == *p.truth ? 1 : 0;
    if (!preds.empty()) {
      std::cout << ", accuracy " << Fixed(100.0 * static_cast<double>(correct) / static_cast<double>(preds.size()), 2)
                << "%";
    }
  }
  std::cout << "\n";
  return 0;
}

int Evaluate(const std::string& manifest_path, const std::string& config_path, uint64_t seed,
             const std::string& report_path, bool ablation, bool keep_transitions, const std::string& svg_dir) {
  AssrConfig cfg = ConfigOrDefault(config_path);
  if (keep_transitions) cfg.preprocess.remove_transitions_on_test = false;
  ExperimentOptions options;
  options.ablation = ablation;
  const ExperimentReport report = RunExperiment(LoadManifest(manifest_path), cfg, seed, options);
  const std::string text = FormatReportText(report);
  fs::path json_path = fs::path(report_path).replace_extension(".json");
  fs::path text_path = report_path;
  if (json_path == text_path) text_path.replace_extension(".txt");
  WriteTextFile(text_path.string(), text);
  WriteTextFile(json_path.string(), ReportToJson(report));
  if (!svg_dir.empty()) {
    fs::create_directories(svg_dir);
    for (const auto& p : report.patients) {
      WriteTextFile((fs::path(svg_dir) / (p.patient_id + "_hypnogram.svg")).string(), HypnogramSvg(p));
    }
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Automatic sleep stage recognition from single-channel EEG"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Progress messages on stderr");
  app.add_flag("-q,--quiet", quiet, "Suppress warnings");

  std::string data_dir, manifest, config, out, report, bundle, record, hypnogram, dump_features, svg_dir;
  uint64_t seed = 0;
  int patients = 13, epochs = 240;
  bool ablation = false, keep_transitions = false;

  auto* ingest = app.add_subcommand("ingest", "Index a directory of EDF recordings and hypnograms");
  ingest->add_option("--data-dir", data_dir, "Directory with <id>.edf/.rec and <id>_stage.txt")->required();
  ingest->add_option("--manifest", manifest, "Manifest to write")->required();
  ingest->add_option("--config", config, "Config document (channel and stage mapping)");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_option("--patients", patients, "Number of patients")->check(CLI::PositiveNumber);
  synth->add_option("--epochs", epochs, "30 s epochs per patient")->check(CLI::PositiveNumber);
  synth->add_option("--seed", seed, "Random seed");

  auto* arch = app.add_subcommand("arch-search", "Score the candidate DBN architectures");
  arch->add_option("--manifest", manifest, "Dataset manifest")->required();
  arch->add_option("--config", config, "Config document");
  arch->add_option("--seed", seed, "Random seed");
  arch->add_option("--report", report, "Write the MSRE table here as well");

  auto* train = app.add_subcommand("train", "Train a model bundle on the training patients");
  train->add_option("--manifest", manifest, "Dataset manifest")->required();
  train->add_option("--config", config, "Config document");
  train->add_option("--seed", seed, "Random seed");
  train->add_option("--out", out, "Bundle directory")->required();
  train->add_option("--dump-features", dump_features, "Write the training TF feature table (CSV)");

  auto* classify = app.add_subcommand("classify", "Classify one recording with a trained bundle");
  classify->add_option("--bundle", bundle, "Bundle directory")->required();
  classify->add_option("--record", record, "EDF recording")->required();
  classify->add_option("--hypnogram", hypnogram, "Reference hypnogram");
  classify->add_option("--out", out, "Prediction table (CSV)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Train on the split and score the test patients");
  evaluate->add_option("--manifest", manifest, "Dataset manifest")->required();
  evaluate->add_option("--config", config, "Config document");
  evaluate->add_option("--seed", seed, "Random seed");
  evaluate->add_option("--report", report, "Text report path; the JSON report goes next to it")->required();
  evaluate->add_flag("--ablation", ablation, "Compare TF-only, unsupervised-only and joint features");
  evaluate->add_flag("--keep-transition-epochs", keep_transitions, "Score transition epochs too");
  evaluate->add_option("--svg-dir", svg_dir, "Write per-patient hypnogram plots here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  log::SetLevel(quiet ? log::Level::kQuiet : verbose ? log::Level::kInfo : log::Level::kWarn);

  try {
    if (*ingest) return Ingest(data_dir, manifest, config);
    if (*synth) return Synth(out, patients, epochs, seed);
    if (*arch) return ArchSearch(manifest, config, seed, report);
    if (*train) return Train(manifest, config, seed, out, dump_features);
    if (*classify) return Classify(bundle, record, hypnogram, out);
    if (*evaluate) return Evaluate(manifest, config, seed, report, ablation, keep_transitions, svg_dir);
  } catch (const Error& e) {
    std::cerr << "assr: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "assr: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
