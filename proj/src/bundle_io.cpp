#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include <openssl/evp.h>

#include "assr/error.hpp"
#include "assr/pipeline.hpp"
#include "json.hpp"

namespace assr {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string Sha256Hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::kIoFailure, "SHA-256 computation failed");
  }
  static const char* kHex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[md[i] >> 4];
    out += kHex[md[i] & 15];
  }
  return out;
}

namespace {

Json Real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
double ReadReal(const Json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

Json VecJson(const Eigen::VectorXd& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(Real(v(i)));
  return out;
}

Eigen::VectorXd VecFrom(const Json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = ReadReal(j[i]);
  return v;
}

Json MatJson(const Eigen::MatrixXd& m) {
  Json data = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(Real(m(r, c)));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Eigen::MatrixXd MatFrom(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const Json& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error(ErrorCode::kSchemaMismatch, "matrix data length does not match its shape");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = ReadReal(data[k++]);
  }
  return m;
}

Stage StageFrom(const Json& j) {
  const auto s = ParseStageName(j.get<std::string>());
  if (!s) throw Error(ErrorCode::kSchemaMismatch, "unknown stage '" + j.get<std::string>() + "'");
  return *s;
}

Json Document(const std::string& kind) { return {{"format", "assr-" + kind}, {"version", kBundleVersion}}; }

void CheckDocument(const Json& j, const std::string& kind) {
  if (j.value("format", "") != "assr-" + kind || j.value("version", -1) != kBundleVersion) {
    throw Error(ErrorCode::kSchemaMismatch, kind + " document has an unexpected format or version");
  }
}

Json DbnJson(const DbnModel& m) {
  Json doc = Document("dbn");
  doc["input_dim"] = m.input_dim;
  doc["clip_sigmas"] = m.input_scaling.clip_sigmas;
  Json layers = Json::array();
  for (const auto& l : m.layers) layers.push_back({{"W", MatJson(l.W)}, {"a", VecJson(l.a)}, {"b", VecJson(l.b)}});
  doc["layers"] = std::move(layers);
  Json decoder = Json::array();
  for (const auto& d : m.decoder) decoder.push_back({{"W", MatJson(d.W)}, {"bias", VecJson(d.bias)}});
  doc["decoder"] = std::move(decoder);
  return doc;
}

DbnModel DbnFrom(const Json& doc) {
  CheckDocument(doc, "dbn");
  DbnModel m;
  m.input_dim = doc.at("input_dim").get<int>();
  m.input_scaling.clip_sigmas = doc.at("clip_sigmas").get<double>();
  for (const auto& l : doc.at("layers")) m.layers.push_back({MatFrom(l.at("W")), VecFrom(l.at("a")), VecFrom(l.at("b"))});
  for (const auto& d : doc.at("decoder")) m.decoder.push_back({MatFrom(d.at("W")), VecFrom(d.at("bias"))});
  return m;
}

Json GpJson(const GpModel& m) {
  Json doc = Document("gp");
  doc["signal_variance"] = m.signal_variance;
  doc["length_scale"] = m.length_scale;
  doc["inputs"] = MatJson(m.inputs);
  Json classes = Json::array();
  for (const auto& c : m.classes) {
    classes.push_back({{"positive", std::string(StageName(c.positive))},
                       {"iterations", c.iterations},
                       {"latent_mode", VecJson(c.latent_mode)},
                       {"gradient", VecJson(c.gradient)},
                       {"sqrt_w", VecJson(c.sqrt_w)},
                       {"objective_trace", c.objective_trace}});
  }
  doc["classes"] = std::move(classes);
  return doc;
}

GpModel GpFrom(const Json& doc) {
  CheckDocument(doc, "gp");
  GpModel m;
  m.signal_variance = doc.at("signal_variance").get<double>();
  m.length_scale = doc.at("length_scale").get<double>();
  m.inputs = MatFrom(doc.at("inputs"));
  for (const auto& c : doc.at("classes")) {
    GpBinaryModel b;
    b.positive = StageFrom(c.at("positive"));
    b.iterations = c.at("iterations").get<int>();
    b.latent_mode = VecFrom(c.at("latent_mode"));
    b.gradient = VecFrom(c.at("gradient"));
    b.sqrt_w = VecFrom(c.at("sqrt_w"));
    b.objective_trace = c.at("objective_trace").get<std::vector<double>>();
    m.classes.push_back(std::move(b));
  }
  m.RebuildFactors();
  return m;
}

Json RfJson(const RfModel& m) {
  Json doc = Document("rf");
  doc["n_features"] = m.n_features;
  doc["features_per_split"] = m.features_per_split;
  doc["seed"] = m.seed;
  doc["oob_accuracy"] = Real(m.oob_accuracy);
  Json trees = Json::array();
  for (const auto& t : m.trees) {
    Json feature = Json::array(), threshold = Json::array(), left = Json::array(), right = Json::array(),
         counts = Json::array();
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      counts.push_back(n.counts);
    }
    trees.push_back({{"feature", std::move(feature)},
                     {"threshold", std::move(threshold)},
                     {"left", std::move(left)},
                     {"right", std::move(right)},
                     {"counts", std::move(counts)}});
  }
  doc["trees"] = std::move(trees);
  return doc;
}

RfModel RfFrom(const Json& doc) {
  CheckDocument(doc, "rf");
  RfModel m;
  m.n_features = doc.at("n_features").get<int>();
  m.features_per_split = doc.at("features_per_split").get<int>();
  m.seed = doc.at("seed").get<uint64_t>();
  m.oob_accuracy = ReadReal(doc.at("oob_accuracy"));
  for (const auto& t : doc.at("trees")) {
    DecisionTree tree;
    const auto& feature = t.at("feature");
    const std::size_t n = feature.size();
    for (std::size_t i = 0; i < n; ++i) {
      TreeNode node;
      node.feature = feature[i].get<int>();
      node.threshold = t.at("threshold")[i].get<double>();
      node.left = t.at("left")[i].get<int>();
      node.right = t.at("right")[i].get<int>();
      node.counts = t.at("counts")[i].get<std::array<uint32_t, kNumClasses>>();
      const int limit = static_cast<int>(n);
      if (node.feature >= m.n_features || (node.feature >= 0 && (node.left <= static_cast<int>(i) ||
                                                                  node.right <= static_cast<int>(i) ||
                                                                  node.left >= limit || node.right >= limit))) {
        throw Error(ErrorCode::kSchemaMismatch, "forest node has invalid links");
      }
      tree.nodes.push_back(node);
    }
    m.trees.push_back(std::move(tree));
  }
  return m;
}

Json HmmJson(const HmmModel& m) {
  Json doc = Document("hmm");
  doc["initial"] = m.initial;
  doc["transition"] = m.transition;
  Json means = Json::array(), variances = Json::array();
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    means.push_back(VecJson(m.means[k]));
    variances.push_back(VecJson(m.variances[k]));
  }
  doc["means"] = std::move(means);
  doc["variances"] = std::move(variances);
  return doc;
}

HmmModel HmmFrom(const Json& doc) {
  CheckDocument(doc, "hmm");
  HmmModel m;
  m.initial = doc.at("initial").get<std::array<double, kNumClasses>>();
  m.transition = doc.at("transition").get<std::array<std::array<double, kNumClasses>, kNumClasses>>();
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    m.means[k] = VecFrom(doc.at("means").at(k));
    m.variances[k] = VecFrom(doc.at("variances").at(k));
  }
  return m;
}

std::string ReadAll(const fs::path& path) { return ReadTextFile(path.string()); }

}  // namespace

void SaveBundle(const ModelBundle& bundle, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create bundle directory " + dir + ": " + ec.message());

  std::map<std::string, std::string> files;
  Json head = Document("bundle");
  head["seed"] = bundle.seed;
  head["feature_set"] = FeatureSetName(bundle.feature_set);
  head["config"] = Json::parse(ConfigToJson(bundle.config));
  head["standardization"] = {{"mean", bundle.standardization.mean}, {"std", bundle.standardization.std}};
  files["bundle.json"] = head.dump(1) + "\n";
  if (bundle.dbn) files["dbn.json"] = DbnJson(*bundle.dbn).dump() + "\n";
  files["gp.json"] = GpJson(bundle.gp).dump() + "\n";
  files["rf.json"] = RfJson(bundle.rf).dump() + "\n";
  files["hmm.json"] = HmmJson(bundle.hmm).dump(1) + "\n";

  // A stale dbn.json from an earlier bundle must not linger.
  if (!bundle.dbn) fs::remove(fs::path(dir) / "dbn.json", ec);

  std::string checksums;
  for (const auto& [name, text] : files) {
    WriteTextFile((fs::path(dir) / name).string(), text);
    checksums += Sha256Hex(text) + "  " + name + "\n";
  }
  WriteTextFile((fs::path(dir) / "MANIFEST.sha256").string(), checksums);
}

ModelBundle LoadBundle(const std::string& dir) {
  const fs::path root(dir);
  if (!fs::exists(root / "MANIFEST.sha256")) {
    throw Error(ErrorCode::kIoFailure, dir + " is not a model bundle (no MANIFEST.sha256)");
  }
  std::map<std::string, Json> docs;
  std::istringstream lines(ReadAll(root / "MANIFEST.sha256"));
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty()) continue;
    const auto sep = line.find("  ");
    if (sep == std::string::npos) throw Error(ErrorCode::kSchemaMismatch, "malformed checksum line: " + line);
    const std::string digest = line.substr(0, sep);
    const std::string name = line.substr(sep + 2);
    if (name.find('/') != std::string::npos) throw Error(ErrorCode::kSchemaMismatch, "checksum entry outside bundle");
    const std::string text = ReadAll(root / name);
    if (Sha256Hex(text) != digest) throw Error(ErrorCode::kIoFailure, name + " fails its checksum");
    try {
      docs[name] = Json::parse(text);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kSchemaMismatch, name + ": " + e.what());
    }
  }
  for (const char* required : {"bundle.json", "gp.json", "rf.json", "hmm.json"}) {
    if (!docs.count(required)) throw Error(ErrorCode::kSchemaMismatch, std::string("bundle lacks ") + required);
  }

  ModelBundle bundle;
  try {
    const Json& head = docs["bundle.json"];
    CheckDocument(head, "bundle");
    bundle.schema_version = head.at("version").get<int>();
    bundle.seed = head.at("seed").get<uint64_t>();
    bundle.feature_set = ParseFeatureSet(head.at("feature_set").get<std::string>());
    bundle.config = ConfigFromJson(head.at("config").dump());
    ApplySeed(bundle.config, bundle.seed);
    bundle.standardization.mean = head.at("standardization").at("mean").get<std::vector<double>>();
    bundle.standardization.std = head.at("standardization").at("std").get<std::vector<double>>();
    if (bundle.feature_set != FeatureSet::kTf) {
      if (!docs.count("dbn.json")) throw Error(ErrorCode::kSchemaMismatch, "bundle lacks dbn.json");
      bundle.dbn = DbnFrom(docs["dbn.json"]);
    }
    bundle.gp = GpFrom(docs["gp.json"]);
    bundle.rf = RfFrom(docs["rf.json"]);
    bundle.hmm = HmmFrom(docs["hmm.json"]);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("bundle document: ") + e.what());
  }
  const std::size_t dim = bundle.standardization.dim();
  if (bundle.standardization.std.size() != dim || static_cast<std::size_t>(bundle.gp.dim()) != dim ||
      static_cast<std::size_t>(bundle.rf.n_features) != dim || static_cast<std::size_t>(bundle.hmm.dim()) != dim) {
    throw Error(ErrorCode::kSchemaMismatch, "bundle components disagree on the feature dimension");
  }
  return bundle;
}

}  // namespace assr
