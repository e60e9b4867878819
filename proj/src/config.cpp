#include "assr/config.hpp"

#include <set>

#include "assr/error.hpp"
#include "assr/random.hpp"
#include "json.hpp"

namespace assr {

using Json = nlohmann::ordered_json;

std::string FeatureSetName(FeatureSet set) {
  switch (set) {
    case FeatureSet::kTf: return "tf";
    case FeatureSet::kUnsup: return "unsup";
    case FeatureSet::kJoint: return "joint";
  }
  return "joint";
}

FeatureSet ParseFeatureSet(const std::string& name) {
  if (name == "tf") return FeatureSet::kTf;
  if (name == "unsup") return FeatureSet::kUnsup;
  if (name == "joint") return FeatureSet::kJoint;
  throw Error(ErrorCode::kInvalidConfig, "unknown feature set '" + name + "'");
}

void ApplySeed(AssrConfig& cfg, uint64_t seed) {
  cfg.preprocess.balance_seed = MixSeed(seed, kStreamBalance);
  cfg.dbn.train.seed = MixSeed(seed, kStreamDbn);
  cfg.gp.seed = MixSeed(seed, kStreamGp);
  cfg.rf.seed = MixSeed(seed, kStreamRf);
}

void ValidateConfig(const AssrConfig& cfg) {
  ValidatePreprocessConfig(cfg.preprocess);
  if (cfg.preprocess.target_fs != kTargetFs) {
    throw Error(ErrorCode::kInvalidConfig, "target_fs is fixed at 64 Hz (384-sample sub-epochs)");
  }
  ValidateFeatureConfig(cfg.features, cfg.preprocess.target_fs);
  ValidateDbnTrainConfig(cfg.dbn.train);
  ValidateArchCandidate(cfg.dbn.architecture);
  for (const auto& c : cfg.dbn.candidates) ValidateArchCandidate(c);
  if (cfg.dbn.architecture_search && cfg.dbn.candidates.empty()) {
    throw Error(ErrorCode::kEmptyCandidates, "architecture search enabled without candidates");
  }
  if (!(cfg.dbn.scaling.clip_sigmas > 0)) throw Error(ErrorCode::kInvalidConfig, "clip_sigmas must be positive");
  if (!(cfg.gp.signal_variance > 0) || cfg.gp.max_newton_iterations < 1 || !(cfg.gp.newton_tolerance > 0)) {
    throw Error(ErrorCode::kInvalidConfig, "invalid GP configuration");
  }
  if (cfg.rf.n_trees < 1 || cfg.rf.min_leaf < 1) throw Error(ErrorCode::kInvalidConfig, "invalid forest configuration");
  if (cfg.experiment.n_train < 1 || cfg.experiment.n_test < 0) {
    throw Error(ErrorCode::kInvalidConfig, "experiment needs n_train >= 1 and n_test >= 0");
  }
  if (cfg.pipeline.channel.empty()) throw Error(ErrorCode::kInvalidConfig, "channel label is empty");
}

namespace {

// Reads known keys from one section and rejects the rest.
class Section {
 public:
  Section(const Json& doc, std::string name) : name_(std::move(name)) {
    if (doc.contains(name_)) {
      node_ = &doc.at(name_);
      if (!node_->is_object()) throw Error(ErrorCode::kInvalidConfig, "section '" + name_ + "' must be an object");
    }
  }

  template <typename T>
  void Get(const std::string& key, T& field) {
    known_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) return;
    try {
      field = node_->at(key).get<T>();
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvalidConfig, name_ + "." + key + ": " + e.what());
    }
  }

  const Json* Raw(const std::string& key) {
    known_.insert(key);
    if (node_ == nullptr || !node_->contains(key)) return nullptr;
    return &node_->at(key);
  }

  void Finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, value] : node_->items()) {
      if (!known_.count(key)) throw Error(ErrorCode::kInvalidConfig, "unknown key " + name_ + "." + key);
    }
  }

 private:
  std::string name_;
  const Json* node_ = nullptr;
  std::set<std::string> known_;
};

}  // namespace

std::string ConfigToJson(const AssrConfig& cfg) {
  Json doc;
  doc["format"] = "assr-config";
  doc["version"] = kConfigVersion;

  const auto& p = cfg.preprocess;
  doc["preprocess"] = {{"notch_hz", p.notch_hz},
                       {"notch_q", p.notch_q},
                       {"band_low", p.band_low},
                       {"band_high", p.band_high},
                       {"bandpass_order", p.bandpass_order},
                       {"target_fs", p.target_fs},
                       {"resample_taps_per_phase", p.resample_taps_per_phase},
                       {"resample_kaiser_beta", p.resample_kaiser_beta},
                       {"remove_transitions_on_test", p.remove_transitions_on_test}};

  const auto& f = cfg.features;
  Json bands = Json::array();
  for (const auto& b : f.bands) {
    bands.push_back({{"name", b.name}, {"low", b.low}, {"high", b.high}, {"closed_high", b.closed_high}});
  }
  doc["features"] = {{"bands", bands},
                     {"entropy_bins", f.entropy_bins},
                     {"harmonic_low", f.harmonic_low},
                     {"harmonic_high", f.harmonic_high},
                     {"welch_segment", f.welch_segment},
                     {"welch_overlap", f.welch_overlap}};

  const auto& t = cfg.dbn.train;
  doc["dbn"] = {{"architecture", cfg.dbn.architecture},
                {"candidates", cfg.dbn.candidates},
                {"architecture_search", cfg.dbn.architecture_search},
                {"clip_sigmas", cfg.dbn.scaling.clip_sigmas},
                {"learning_rate", t.learning_rate},
                {"momentum_initial", t.momentum_initial},
                {"momentum_final", t.momentum_final},
                {"momentum_switch_epoch", t.momentum_switch_epoch},
                {"epochs_per_layer", t.epochs_per_layer},
                {"batch_size", t.batch_size},
                {"cd_k", t.cd_k},
                {"sample_visible", t.sample_visible},
                {"weight_init_std", t.weight_init_std},
                {"fine_tune_epochs", t.fine_tune_epochs},
                {"fine_tune_lr", t.fine_tune_lr},
                {"fine_tune_momentum", t.fine_tune_momentum},
                {"fine_tune_batch_size", t.fine_tune_batch_size}};

  doc["gp"] = {{"signal_variance", cfg.gp.signal_variance},
               {"length_scale", cfg.gp.length_scale},
               {"max_points_per_class", cfg.gp.max_points_per_class},
               {"newton_tolerance", cfg.gp.newton_tolerance},
               {"max_newton_iterations", cfg.gp.max_newton_iterations},
               {"grid_search", cfg.gp.grid_search}};

  doc["rf"] = {{"n_trees", cfg.rf.n_trees},
               {"features_per_split", cfg.rf.features_per_split},
               {"max_depth", cfg.rf.max_depth},
               {"min_leaf", cfg.rf.min_leaf}};

  Json mapping = Json::object();
  for (const auto& [code, stage] : cfg.pipeline.stage_mapping) {
    mapping[std::to_string(code)] = std::string(StageName(stage));
  }
  doc["pipeline"] = {{"channel", cfg.pipeline.channel},
                     {"channel_aliases", cfg.pipeline.channel_aliases},
                     {"stage_mapping", mapping},
                     {"feature_set", FeatureSetName(cfg.pipeline.feature_set)}};

  doc["experiment"] = {{"n_train", cfg.experiment.n_train}, {"n_test", cfg.experiment.n_test}};
  return doc.dump(2) + "\n";
}

AssrConfig ConfigFromJson(const std::string& text) {
  AssrConfig cfg;
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kInvalidConfig, "config must be a JSON object");
  if (doc.value("format", "assr-config") != "assr-config") {
    throw Error(ErrorCode::kSchemaMismatch, "not an assr config document");
  }
  if (doc.value("version", kConfigVersion) != kConfigVersion) {
    throw Error(ErrorCode::kSchemaMismatch, "unsupported config version");
  }
  static const std::set<std::string> kSections = {"format",   "version", "preprocess", "features", "dbn",
                                                  "gp",       "rf",      "pipeline",   "experiment"};
  for (const auto& [key, value] : doc.items()) {
    if (!kSections.count(key)) throw Error(ErrorCode::kInvalidConfig, "unknown config section '" + key + "'");
  }

  {
    Section s(doc, "preprocess");
    auto& p = cfg.preprocess;
    s.Get("notch_hz", p.notch_hz);
    s.Get("notch_q", p.notch_q);
    s.Get("band_low", p.band_low);
    s.Get("band_high", p.band_high);
    s.Get("bandpass_order", p.bandpass_order);
    s.Get("target_fs", p.target_fs);
    s.Get("resample_taps_per_phase", p.resample_taps_per_phase);
    s.Get("resample_kaiser_beta", p.resample_kaiser_beta);
    s.Get("remove_transitions_on_test", p.remove_transitions_on_test);
    s.Finish();
  }
  {
    Section s(doc, "features");
    auto& f = cfg.features;
    if (const Json* bands = s.Raw("bands")) {
      if (!bands->is_array() || bands->size() != 5) {
        throw Error(ErrorCode::kInvalidConfig, "features.bands must list exactly five bands");
      }
      for (std::size_t i = 0; i < 5; ++i) {
        const Json& b = (*bands)[i];
        f.bands[i] = {b.value("name", f.bands[i].name), b.at("low").get<double>(), b.at("high").get<double>(),
                      b.value("closed_high", i == 4)};
      }
    }
    s.Get("entropy_bins", f.entropy_bins);
    s.Get("harmonic_low", f.harmonic_low);
    s.Get("harmonic_high", f.harmonic_high);
    s.Get("welch_segment", f.welch_segment);
    s.Get("welch_overlap", f.welch_overlap);
    s.Finish();
  }
  {
    Section s(doc, "dbn");
    auto& t = cfg.dbn.train;
    s.Get("architecture", cfg.dbn.architecture);
    s.Get("candidates", cfg.dbn.candidates);
    s.Get("architecture_search", cfg.dbn.architecture_search);
    s.Get("clip_sigmas", cfg.dbn.scaling.clip_sigmas);
    s.Get("learning_rate", t.learning_rate);
    s.Get("momentum_initial", t.momentum_initial);
    s.Get("momentum_final", t.momentum_final);
    s.Get("momentum_switch_epoch", t.momentum_switch_epoch);
    s.Get("epochs_per_layer", t.epochs_per_layer);
    s.Get("batch_size", t.batch_size);
    s.Get("cd_k", t.cd_k);
    s.Get("sample_visible", t.sample_visible);
    s.Get("weight_init_std", t.weight_init_std);
    s.Get("fine_tune_epochs", t.fine_tune_epochs);
    s.Get("fine_tune_lr", t.fine_tune_lr);
    s.Get("fine_tune_momentum", t.fine_tune_momentum);
    s.Get("fine_tune_batch_size", t.fine_tune_batch_size);
    s.Finish();
  }
  {
    Section s(doc, "gp");
    s.Get("signal_variance", cfg.gp.signal_variance);
    s.Get("length_scale", cfg.gp.length_scale);
    s.Get("max_points_per_class", cfg.gp.max_points_per_class);
    s.Get("newton_tolerance", cfg.gp.newton_tolerance);
    s.Get("max_newton_iterations", cfg.gp.max_newton_iterations);
    s.Get("grid_search", cfg.gp.grid_search);
    s.Finish();
  }
  {
    Section s(doc, "rf");
    s.Get("n_trees", cfg.rf.n_trees);
    s.Get("features_per_split", cfg.rf.features_per_split);
    s.Get("max_depth", cfg.rf.max_depth);
    s.Get("min_leaf", cfg.rf.min_leaf);
    s.Finish();
  }
  {
    Section s(doc, "pipeline");
    s.Get("channel", cfg.pipeline.channel);
    s.Get("channel_aliases", cfg.pipeline.channel_aliases);
    if (const Json* mapping = s.Raw("stage_mapping")) {
      cfg.pipeline.stage_mapping.clear();
      for (const auto& [code, name] : mapping->items()) {
        const auto stage = ParseStageName(name.get<std::string>());
        if (!stage) throw Error(ErrorCode::kInvalidConfig, "unknown stage name '" + name.get<std::string>() + "'");
        try {
          cfg.pipeline.stage_mapping[std::stoi(code)] = *stage;
        } catch (const std::exception&) {
          throw Error(ErrorCode::kInvalidConfig, "stage code '" + code + "' is not an integer");
        }
      }
    }
    std::string feature_set = FeatureSetName(cfg.pipeline.feature_set);
    s.Get("feature_set", feature_set);
    cfg.pipeline.feature_set = ParseFeatureSet(feature_set);
    s.Finish();
  }
  {
    Section s(doc, "experiment");
    s.Get("n_train", cfg.experiment.n_train);
    s.Get("n_test", cfg.experiment.n_test);
    s.Finish();
  }
  ValidateConfig(cfg);
  return cfg;
}

AssrConfig LoadConfig(const std::string& path) { return ConfigFromJson(ReadTextFile(path)); }

}  // namespace assr
