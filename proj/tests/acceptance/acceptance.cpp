// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "assr/dbn.hpp"
#include "assr/hmm.hpp"
#include "assr/hypnogram.hpp"
#include "assr/pipeline.hpp"
#include "assr/rbm.hpp"
#include "assr/tf_features.hpp"
#include "oracles.hpp"

using namespace assr;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;
using Json = nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  enum Status { kPass, kFail, kSkip } status = kFail;
  std::string detail;
};

Outcome Pass(std::string d) { return {Outcome::kPass, std::move(d)}; }
Outcome Fail(std::string d) { return {Outcome::kFail, std::move(d)}; }
Outcome Skip(std::string d) { return {Outcome::kSkip, std::move(d)}; }

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Num(double v, int precision = 3) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

// Collects failures of individual checks inside one criterion.
struct Checker {
  long checks = 0;
  long failures = 0;
  std::string first;

  void operator()(bool ok, const std::string& what) {
    ++checks;
    if (!ok && failures++ == 0) first = what;
  }
  Outcome Result(double seconds, double limit) const {
    const std::string d = std::to_string(checks) + " checks, " + Num(seconds) + " s";
    if (failures) return Fail(std::to_string(failures) + " of " + d + "; first: " + first);
    if (seconds >= limit) return Fail(d + " exceeds " + Num(limit) + " s");
    return Pass(d);
  }
};

bool RelClose(double got, double want, double tol) {
  return std::abs(got - want) <= tol * std::max(1.0, std::abs(want));
}

Outcome ArchitectureSelection() {
  const auto start = Clock::now();
  const auto cands = DefaultArchCandidates();
  const std::vector<double> msre = {0.034, 0.0077, 0.0049, 0.0025};
  const MatrixXd data = oracle::BandMixture(20, 384, 1);
  const ArchSelection sel = SelectArchitecture(cands, data, DbnTrainConfig{},
                                               [&](const ArchCandidate& a, const MatrixXd&, const MatrixXd&) {
                                                 const auto i = std::find(cands.begin(), cands.end(), a) - cands.begin();
                                                 return msre.at(static_cast<std::size_t>(i));
                                               });
  const double t = Seconds(start);
  const std::string got = FormatArch(sel.best);
  if (sel.best != ArchCandidate{150, 75, 35, 25, 20, 15}) return Fail("selected " + got);
  if (t >= 1.0) return Fail("took " + Num(t) + " s");
  return Pass("selected " + got + " in " + Num(t) + " s");
}

Outcome RbmSuite() {
  using oracle::rbm::Bits;
  const auto start = Clock::now();
  Checker check;
  std::mt19937_64 rng(101);

  for (int trial = 0; trial < 50; ++trial) {
    const int I = 1 + static_cast<int>(rng() % 8);
    const int J = 1 + static_cast<int>(rng() % static_cast<std::size_t>(std::min(8, 12 - I)));
    const RbmLayer l = oracle::rbm::RandomLayer(I, J, rng);
    double total = 0;
    for (unsigned vb = 0; vb < (1u << I); ++vb) {
      for (unsigned hb = 0; hb < (1u << J); ++hb) total += RbmJointProb(l, Bits(I, vb), Bits(J, hb));
    }
    check(std::abs(total - 1) <= 1e-12, "joint probabilities sum to " + Num(total, 17));
  }

  for (int trial = 0; trial < 50; ++trial) {
    const RbmLayer l = oracle::rbm::RandomLayer(3, 2, rng);
    const MatrixXd data = oracle::rbm::RandomBinary(6, 3, rng);
    const RbmGradient g = ExactLoglikGradient(l, data);
    const double eps = 1e-5;
    auto fd = [&](auto&& perturb) {
      RbmLayer p = l, m = l;
      perturb(p, eps);
      perturb(m, -eps);
      return (oracle::rbm::MeanLogLik(p, data) - oracle::rbm::MeanLogLik(m, data)) / (2 * eps);
    };
    for (int j = 0; j < 2; ++j) {
      for (int i = 0; i < 3; ++i) {
        check(RelClose(g.dW(j, i), fd([&](RbmLayer& x, double e) { x.W(j, i) += e; }), 1e-6), "dW vs finite difference");
      }
      check(RelClose(g.da(j), fd([&](RbmLayer& x, double e) { x.a(j) += e; }), 1e-6), "da vs finite difference");
    }
    for (int i = 0; i < 3; ++i) {
      check(RelClose(g.db(i), fd([&](RbmLayer& x, double e) { x.b(i) += e; }), 1e-6), "db vs finite difference");
    }
  }

  for (int trial = 0; trial < 50; ++trial) {
    const RbmLayer l = oracle::rbm::RandomLayer(3, 2, rng);
    const double z = oracle::rbm::Partition(l);
    auto joint = [&](const VectorXd& v, const VectorXd& h) { return std::exp(-oracle::rbm::Energy(l, v, h)) / z; };
    for (unsigned vb = 0; vb < 8; ++vb) {
      const VectorXd v = Bits(3, vb);
      double marginal = 0;
      VectorXd on = VectorXd::Zero(2);
      for (unsigned hb = 0; hb < 4; ++hb) {
        marginal += joint(v, Bits(2, hb));
        on += joint(v, Bits(2, hb)) * Bits(2, hb);
      }
      check((HiddenGivenVisible(l, v) - on / marginal).cwiseAbs().maxCoeff() <= 1e-10, "P(h|v) vs enumeration");
    }
    for (unsigned hb = 0; hb < 4; ++hb) {
      const VectorXd h = Bits(2, hb);
      double marginal = 0;
      VectorXd on = VectorXd::Zero(3);
      for (unsigned vb = 0; vb < 8; ++vb) {
        marginal += joint(Bits(3, vb), h);
        on += joint(Bits(3, vb), h) * Bits(3, vb);
      }
      check((VisibleGivenHidden(l, h) - on / marginal).cwiseAbs().maxCoeff() <= 1e-10, "P(v|h) vs enumeration");
    }
  }
  return check.Result(Seconds(start), 60);
}

Outcome FeatureSuite() {
  constexpr double kPi = std::numbers::pi;
  const auto start = Clock::now();
  Checker check;
  const FeatureConfig cfg;
  std::mt19937_64 rng(202);

  check(HistogramEntropy(std::vector<double>(384, 3.0), 32) == 0.0, "entropy of a constant");
  std::vector<double> uniform;
  for (int j = 0; j < 32; ++j) {
    for (int r = 0; r < 12; ++r) uniform.push_back(j + 0.5);
  }
  uniform.front() = 0;
  uniform.back() = 32;
  check(RelClose(HistogramEntropy(uniform, 32), std::log(32.0), 1e-12), "entropy of a uniform histogram");

  for (double f : {2.0, 4.0, 7.0, 10.0}) {
    const auto h = ComputeHjorth(oracle::tf::Sine(384, f, 64, 1, 0));
    check(std::abs(h.mobility / (2 * std::sin(kPi * f / 64)) - 1) <= 0.01, "Hjorth mobility of a sinusoid");
  }

  for (int trial = 0; trial < 100; ++trial) {
    std::normal_distribution<double> g(0, 3);
    std::vector<double> sym;
    for (int i = 0; i < 192; ++i) {
      const double v = g(rng);
      sym.push_back(5 + v);
      sym.push_back(5 - v);
    }
    check(std::abs(SkewnessKurtosis(sym).skew) <= 1e-12, "skew of symmetric samples");
  }

  for (int trial = 0; trial < 1000; ++trial) {
    const auto x = oracle::tf::RandomSubEpoch(rng);
    const TfFeatureVector got = ExtractTf(x, cfg);
    const auto want = oracle::tf::Features(x);
    double rel_sum = 0;
    for (int b = 0; b < 5; ++b) rel_sum += got.values[static_cast<std::size_t>(b)];
    check(std::abs(rel_sum - 1) <= 1e-9, "relative powers sum to " + Num(rel_sum, 17));
    check(got.entropy() >= 0 && got.entropy() <= std::log(32.0) + 1e-12, "entropy within [0, ln 32]");
    for (std::size_t k = 0; k < kNumTfFeatures; ++k) {
      check(RelClose(got.values[k], want[k], 1e-12), "feature " + TfFeatureNames()[k] + " vs oracle");
    }
  }
  return check.Result(Seconds(start), 60);
}

Outcome ViterbiSuite() {
  const auto start = Clock::now();
  Checker check;
  std::mt19937_64 rng(303);
  std::normal_distribution<double> g(0, 1.2);
  for (int trial = 0; trial < 200; ++trial) {
    const HmmModel m = oracle::hmm::RandomModel(rng, 2);
    const int T = 1 + static_cast<int>(rng() % 6);
    MatrixXd seq(T, 2);
    for (int i = 0; i < seq.size(); ++i) seq.data()[i] = g(rng);
    const auto want = oracle::hmm::BruteForcePath(m, seq);
    const auto got = Viterbi(m, seq);
    std::vector<std::size_t> idx;
    for (Stage s : got) idx.push_back(ClassIndex(s));
    check(idx == want, "path mismatch at T=" + std::to_string(T));
  }
  return check.Result(Seconds(start), 10);
}

Outcome EnsembleTable() {
  Checker check;
  for (Stage g : kClasses) {
    for (Stage r : kClasses) {
      for (Stage h : kClasses) {
        const Stage want = oracle::EnsembleVote(g, r, h);
        check(EnsembleVote(g, r, h) == want, "labels " + std::string(StageName(g)) + "," + std::string(StageName(r)) +
                                                 "," + std::string(StageName(h)));
        check(EnsembleVote(Prediction{g, {}}, Prediction{r, {}}, h) == want, "prediction overload");
      }
    }
  }
  check(EnsembleVote(Stage::kSws, Stage::kRem, Stage::kNrem1) == Stage::kSws, "three-way disagreement keeps the GP label");
  return check.Result(0, 1);
}

Outcome FineTuneSuite() {
  const auto start = Clock::now();
  Checker check;
  std::mt19937_64 rng(404);
  std::normal_distribution<double> g(0, 0.7);
  DbnModel m;
  m.input_dim = 6;
  for (auto [vis, hid] : {std::pair{6, 4}, std::pair{4, 3}}) {
    RbmLayer l = RbmLayer::Zeros(vis, hid);
    for (int i = 0; i < l.W.size(); ++i) l.W.data()[i] = g(rng);
    for (int i = 0; i < l.a.size(); ++i) l.a(i) = g(rng);
    for (int i = 0; i < l.b.size(); ++i) l.b(i) = g(rng);
    m.layers.push_back(l);
  }
  const Autoencoder net = Autoencoder::Unroll(m);
  const MatrixXd batch = oracle::BandMixture(7, 6, 5);
  const AutoencoderGradient grad = AutoencoderLossAndGradient(net, batch);
  const double h = 1e-6;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-8); };
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    for (int i = 0; i < net.weights[l].size(); ++i) {
      Autoencoder p = net, q = net;
      p.weights[l].data()[i] += h;
      q.weights[l].data()[i] -= h;
      const double fd = (AutoencoderLoss(p, batch) - AutoencoderLoss(q, batch)) / (2 * h);
      check(rel(grad.d_weights[l].data()[i], fd) <= 1e-4, "weight gradient vs central difference");
    }
    for (int i = 0; i < net.biases[l].size(); ++i) {
      Autoencoder p = net, q = net;
      p.biases[l](i) += h;
      q.biases[l](i) -= h;
      const double fd = (AutoencoderLoss(p, batch) - AutoencoderLoss(q, batch)) / (2 * h);
      check(rel(grad.d_biases[l](i), fd) <= 1e-4, "bias gradient vs central difference");
    }
  }

  const MatrixXd data = oracle::BandMixture(200, 48, 6);
  DbnTrainConfig cfg;
  cfg.epochs_per_layer = 5;
  cfg.batch_size = 32;
  cfg.fine_tune_epochs = 15;
  cfg.fine_tune_lr = 0.5;
  cfg.seed = 7;
  const DbnModel base = TrainDbn(data, {30, 15}, cfg);
  std::vector<double> trace;
  FineTune(base, data, cfg, &trace);
  check(trace.size() == 16, "trace length");
  for (std::size_t i = 1; i < trace.size(); ++i) check(trace[i] <= trace[i - 1], "MSRE rose during fine-tuning");
  Outcome out = check.Result(Seconds(start), 60);
  if (out.status == Outcome::kPass && !trace.empty()) {
    out.detail += "; MSRE " + Num(trace.front(), 4) + " -> " + Num(trace.back(), 4);
  }
  return out;
}

// ---- command-line criteria ----

struct Runner {
  std::string assr;
  fs::path work;

  int Run(const std::vector<std::string>& args, const std::string& log) const {
    std::string cmd = "\"" + assr + "\"";
    for (const auto& a : args) cmd += " \"" + a + "\"";
    cmd += " > \"" + (work / log).string() + "\" 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc;
  }
};

std::string Slurp(const fs::path& p) { return fs::exists(p) ? ReadTextFile(p.string()) : std::string(); }

struct EvalRun {
  int rc = -1;
  double seconds = 0;
  fs::path report;
  Json json;
};

EvalRun Evaluate(const Runner& r, const fs::path& manifest, const std::string& name, bool ablation) {
  EvalRun run;
  run.report = r.work / (name + ".txt");
  std::vector<std::string> args = {"evaluate", "--manifest", manifest.string(), "--seed", "1",
                                   "--report", run.report.string()};
  if (ablation) args.push_back("--ablation");
  const auto start = Clock::now();
  run.rc = r.Run(args, name + ".log");
  run.seconds = Seconds(start);
  const fs::path json_path = fs::path(run.report).replace_extension(".json");
  if (run.rc == 0 && fs::exists(json_path)) run.json = Json::parse(ReadTextFile(json_path.string()));
  return run;
}

// Total and per-class accuracy recomputed from the pooled counts.
struct Accuracy {
  double total = 0;
  std::array<double, kNumClasses> per_class{};
};

Accuracy FromCounts(const Json& confusion) {
  Accuracy a;
  long diag = 0, all = 0;
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    long row = 0;
    for (std::size_t p = 0; p < kNumClasses; ++p) row += confusion["counts"][t][p].get<long>();
    const long hit = confusion["counts"][t][t].get<long>();
    a.per_class[t] = row ? 100.0 * static_cast<double>(hit) / static_cast<double>(row) : 0.0;
    diag += hit;
    all += row;
  }
  a.total = all ? 100.0 * static_cast<double>(diag) / static_cast<double>(all) : 0.0;
  return a;
}

bool HasTableLayout(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int header = 0, rows = 0;
  bool total = false;
  while (std::getline(in, line)) {
    if (line.rfind("% Classified", 0) == 0) {
      ++header;
      rows = 0;
      continue;
    }
    if (header == 1) {
      for (Stage s : kClasses) {
        if (line.rfind(std::string(StageName(s)), 0) == 0) ++rows;
      }
      if (line.rfind("Total accuracy: ", 0) == 0) {
        total = rows == 5;
        break;
      }
    }
  }
  return total;
}

Outcome Synthetic(const EvalRun& run) {
  if (run.rc != 0 || run.json.is_null()) return Fail("assr evaluate failed (exit " + std::to_string(run.rc) + ")");
  const Accuracy a = FromCounts(run.json["ensemble"]);
  const double sws = a.per_class[ClassIndex(Stage::kSws)];
  const std::string d = "total " + Num(a.total, 4) + ", SWS " + Num(sws, 4) + ", " + Num(run.seconds) + " s";
  if (std::abs(a.total - run.json["ensemble"]["total_accuracy"].get<double>()) > 1e-9) {
    return Fail("reported total disagrees with counts; " + d);
  }
  if (a.total < 90.0 || sws < 90.0) return Fail(d);
  if (run.seconds >= 600) return Fail(d + " exceeds 600 s");
  return Pass(d);
}

Outcome Ablation(const EvalRun& run) {
  if (run.rc != 0 || run.json.is_null()) return Fail("assr evaluate --ablation failed (exit " + std::to_string(run.rc) + ")");
  const Json& rows = run.json["ablation"];
  if (!rows.is_array() || rows.size() != 3) return Fail("expected 3 ablation rows");
  double tf = 0, unsup = 0, joint = 0;
  for (const auto& row : rows) {
    if (row["accuracy"].size() != 4) return Fail("expected 4 methods per row");
    const double ens = row["accuracy"]["Ensemble"].get<double>();
    const std::string set = row["feature_set"].get<std::string>();
    if (set == "tf") {
      tf = ens;
      if (row["dim"].get<int>() != 14) return Fail("TF-only dimension " + row["dim"].dump());
    } else if (set == "unsup") {
      unsup = ens;
    } else {
      joint = ens;
    }
  }
  const std::string d = "tf " + Num(tf, 4) + ", unsup " + Num(unsup, 4) + ", joint " + Num(joint, 4);
  return joint >= std::max(tf, unsup) - 2.0 ? Pass(d) : Fail(d);
}

bool SameTree(const fs::path& a, const fs::path& b, std::string* why) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
  std::size_t other = 0;
  for (const auto& e : fs::directory_iterator(b)) {
    (void)e;
    ++other;
  }
  if (names.size() != other) {
    *why = "file counts differ";
    return false;
  }
  for (const auto& n : names) {
    if (Slurp(a / n) != Slurp(b / n)) {
      *why = n + " differs";
      return false;
    }
  }
  return true;
}

Outcome Determinism(const Runner& r, const fs::path& manifest, const EvalRun& first) {
  std::vector<fs::path> bundles = {r.work / "bundle_a", r.work / "bundle_b"};
  for (std::size_t i = 0; i < 2; ++i) {
    fs::remove_all(bundles[i]);
    const int rc = r.Run({"train", "--manifest", manifest.string(), "--seed", "1", "--out", bundles[i].string()},
                         "train_" + std::to_string(i) + ".log");
    if (rc != 0) return Fail("assr train failed (exit " + std::to_string(rc) + ")");
  }
  std::string why;
  if (!SameTree(bundles[0], bundles[1], &why)) return Fail("bundles differ: " + why);
  if (first.rc != 0) return Fail("first evaluate run failed");
  const EvalRun second = Evaluate(r, manifest, "synthetic_repeat", false);
  if (second.rc != 0) return Fail("second evaluate run failed");
  for (const char* ext : {".txt", ".json"}) {
    if (Slurp(fs::path(first.report).replace_extension(ext)) != Slurp(fs::path(second.report).replace_extension(ext))) {
      return Fail(std::string("evaluate reports differ (") + ext + ")");
    }
  }
  return Pass("bundles and reports byte-identical");
}

bool HasRecordings(const std::string& dir) {
  if (dir.empty() || !fs::is_directory(dir)) return false;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (ext == ".edf" || ext == ".rec") return true;
  }
  return false;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria runner"};
  std::string assr_path, work_dir, dataset_dir;
  app.add_option("--assr", assr_path, "Path to the assr executable")->required();
  app.add_option("--work", work_dir, "Scratch directory")->required();
  app.add_option("--dataset", dataset_dir, "Directory with the PhysioNet recordings and hypnograms");
  CLI11_PARSE(app, argc, argv);

  Runner runner{assr_path, work_dir};
  fs::remove_all(runner.work);
  fs::create_directories(runner.work);

  int failures = 0;
  auto report = [&](const std::string& id, const std::string& name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = Fail(std::string("exception: ") + e.what());
    }
    static const char* kLabel[] = {"PASS", "FAIL", "SKIP"};
    if (o.status == Outcome::kFail) ++failures;
    std::cout << kLabel[o.status] << " " << id << " " << name << ": " << o.detail << std::endl;
  };

  report("1", "architecture selection", ArchitectureSelection);
  report("2", "RBM correctness", RbmSuite);
  report("3", "feature identities", FeatureSuite);
  report("4", "Viterbi vs brute force", ViterbiSuite);
  report("5", "ensemble truth table", EnsembleTable);
  report("6", "fine-tuning", FineTuneSuite);

  const fs::path synth_dir = runner.work / "synthetic";
  const int synth_rc = runner.Run({"synth", "--out", synth_dir.string(), "--patients", "13", "--seed", "2024"},
                                  "synth.log");
  const fs::path synth_manifest = synth_dir / "manifest.json";
  EvalRun plain, ablation;
  if (synth_rc == 0) {
    plain = Evaluate(runner, synth_manifest, "synthetic", false);
    ablation = Evaluate(runner, synth_manifest, "synthetic_ablation", true);
  }
  report("7", "synthetic end-to-end", [&] {
    if (synth_rc != 0) return Fail("assr synth failed (exit " + std::to_string(synth_rc) + ")");
    return Synthetic(plain);
  });

  const bool have_dataset = HasRecordings(dataset_dir);
  EvalRun physionet;
  report("8", "PhysioNet protocol", [&] {
    if (!have_dataset) return Skip("dataset not present (pass --dataset DIR)");
    const fs::path manifest = runner.work / "physionet_manifest.json";
    const int rc = runner.Run({"ingest", "--data-dir", dataset_dir, "--manifest", manifest.string()}, "ingest.log");
    if (rc != 0) return Fail("assr ingest failed (exit " + std::to_string(rc) + ")");
    physionet = Evaluate(runner, manifest, "physionet", true);
    if (physionet.rc != 0 || physionet.json.is_null()) {
      return Fail("assr evaluate failed (exit " + std::to_string(physionet.rc) + ")");
    }
    const Accuracy a = FromCounts(physionet.json["ensemble"]);
    const std::string d = "total " + Num(a.total, 4) + ", " + Num(physionet.seconds) + " s";
    if (!HasTableLayout(Slurp(physionet.report))) return Fail("confusion table layout; " + d);
    if (a.total < 70.0 || physionet.seconds >= 7200) return Fail(d);
    return Pass(d);
  });

  report("9", "ablation ordering (PhysioNet)", [&] {
    if (!have_dataset) return Skip("dataset not present");
    return Ablation(physionet);
  });
  report("9", "ablation ordering (synthetic)", [&] {
    if (synth_rc != 0) return Fail("assr synth failed");
    return Ablation(ablation);
  });

  report("10", "determinism", [&] {
    if (synth_rc != 0) return Fail("assr synth failed");
    return Determinism(runner, synth_manifest, plain);
  });

  return failures == 0 ? 0 : 1;
}
