#include "assr/gp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "assr/error.hpp"
#include "assr/log.hpp"
#include "assr/random.hpp"

namespace assr {
namespace {

double LogSigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

double LogLikelihood(const Eigen::VectorXd& f, const Eigen::VectorXd& t) {
  double s = 0;
  for (Eigen::Index i = 0; i < f.size(); ++i) s += t(i) > 0.5 ? LogSigmoid(f(i)) : LogSigmoid(-f(i));
  return s;
}

Eigen::VectorXd SigmoidVec(const Eigen::VectorXd& f) {
  return f.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

Eigen::MatrixXd CholFactor(const Eigen::MatrixXd& K, const Eigen::VectorXd& sqrt_w) {
  Eigen::MatrixXd B = sqrt_w.asDiagonal() * K * sqrt_w.asDiagonal();
  B.diagonal().array() += 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCode::kInvalidConfig, "GP Cholesky factorization failed");
  }
  return llt.matrixL();
}

double ProbitSquash(double mean, double variance) {
  return 1.0 / (1.0 + std::exp(-mean / std::sqrt(1.0 + std::numbers::pi * std::max(variance, 0.0) / 8.0)));
}

std::vector<std::size_t> StratifiedCap(std::span<const Stage> y, int cap, uint64_t seed) {
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < y.size(); ++i) by_class[ClassIndex(y[i])].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& members : by_class) {
    if (cap > 0 && members.size() > static_cast<std::size_t>(cap)) {
      std::shuffle(members.begin(), members.end(), rng);
      members.resize(static_cast<std::size_t>(cap));
    }
    keep.insert(keep.end(), members.begin(), members.end());
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

GpModel FitWithHyperparameters(const Eigen::MatrixXd& X, std::span<const Stage> y,
                               const std::vector<Stage>& classes, double signal_variance,
                               double length_scale, const GpConfig& cfg) {
  GpModel model;
  model.inputs = X;
  model.signal_variance = signal_variance;
  model.length_scale = length_scale;
  const Eigen::MatrixXd K = KernelMatrix(X, X, signal_variance, length_scale);
  for (Stage c : classes) {
    Eigen::VectorXd t(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) t(i) = y[static_cast<std::size_t>(i)] == c ? 1.0 : 0.0;
    GpBinaryModel bin = FitBinaryGp(K, t, cfg.newton_tolerance, cfg.max_newton_iterations);
    bin.positive = c;
    model.classes.push_back(std::move(bin));
  }
  return model;
}

}  // namespace

double RbfKernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double signal_variance,
                 double length_scale) {
  return signal_variance * std::exp(-(x - y).squaredNorm() / (2 * length_scale * length_scale));
}

Eigen::MatrixXd KernelMatrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double signal_variance,
                             double length_scale) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * a * b.transpose();
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  const double inv = 1.0 / (2 * length_scale * length_scale);
  return d2.unaryExpr([&](double v) { return signal_variance * std::exp(-std::max(v, 0.0) * inv); });
}

GpBinaryModel FitBinaryGp(const Eigen::MatrixXd& K, const Eigen::VectorXd& targets, double tolerance,
                          int max_iterations) {
  const Eigen::Index n = K.rows();
  GpBinaryModel out;
  Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  auto objective = [&](const Eigen::VectorXd& av, const Eigen::VectorXd& fv) {
    return -0.5 * av.dot(fv) + LogLikelihood(fv, targets);
  };
  double psi = objective(a, f);
  out.objective_trace.push_back(psi);

  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd pi = SigmoidVec(f);
    const Eigen::VectorXd w = (pi.array() * (1.0 - pi.array())).matrix();
    const Eigen::VectorXd sw = w.cwiseSqrt();
    const Eigen::MatrixXd L = CholFactor(K, sw);
    const Eigen::VectorXd b = w.cwiseProduct(f) + (targets - pi);
    Eigen::VectorXd c = sw.cwiseProduct(K * b);
    L.triangularView<Eigen::Lower>().solveInPlace(c);
    L.transpose().triangularView<Eigen::Upper>().solveInPlace(c);
    const Eigen::VectorXd a_full = b - sw.cwiseProduct(c);
    const Eigen::VectorXd f_full = K * a_full;

    // Step halving keeps the objective non-decreasing.
    double step = 1.0;
    Eigen::VectorXd a_new = a_full;
    Eigen::VectorXd f_new = f_full;
    double psi_new = objective(a_new, f_new);
    for (int h = 0; h < 30 && psi_new < psi; ++h) {
      step *= 0.5;
      a_new = a + step * (a_full - a);
      f_new = f + step * (f_full - f);
      psi_new = objective(a_new, f_new);
    }
    if (psi_new < psi) break;
    const double change = (f_new - f).cwiseAbs().maxCoeff();
    a = std::move(a_new);
    f = std::move(f_new);
    psi = psi_new;
    out.objective_trace.push_back(psi);
    out.iterations = it + 1;
    if (change < tolerance) break;
  }

  const Eigen::VectorXd pi = SigmoidVec(f);
  out.latent_mode = f;
  out.gradient = targets - pi;
  out.sqrt_w = (pi.array() * (1.0 - pi.array())).sqrt().matrix();
  out.chol = CholFactor(K, out.sqrt_w);
  return out;
}

void GpModel::RebuildFactors() {
  const Eigen::MatrixXd K = KernelMatrix(inputs, inputs, signal_variance, length_scale);
  for (auto& c : classes) c.chol = CholFactor(K, c.sqrt_w);
}

GpModel TrainGp(const Eigen::MatrixXd& X, std::span<const Stage> y, const GpConfig& cfg) {
  if (X.rows() == 0) throw Error(ErrorCode::kEmptyData, "no GP training data");
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "GP inputs and labels differ in length");
  }
  std::vector<Stage> classes;
  for (Stage c : kClasses) {
    if (std::find(y.begin(), y.end(), c) != y.end()) classes.push_back(c);
  }
  for (Stage s : y) {
    if (!IsClass(s)) throw Error(ErrorCode::kExcludedLabel, "GP labels must be merged classes");
  }
  if (classes.size() < 2) throw Error(ErrorCode::kSingleClass, "GP training needs >= 2 classes");

  const auto keep = StratifiedCap(y, cfg.max_points_per_class, MixSeed(cfg.seed, kStreamGp));
  Eigen::MatrixXd Xs(static_cast<Eigen::Index>(keep.size()), X.cols());
  std::vector<Stage> ys;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    Xs.row(static_cast<Eigen::Index>(i)) = X.row(static_cast<Eigen::Index>(keep[i]));
    ys.push_back(y[keep[i]]);
  }

  const double base_length = cfg.length_scale > 0 ? cfg.length_scale : std::sqrt(static_cast<double>(X.cols()));
  double best_sv = cfg.signal_variance;
  double best_ls = base_length;

  if (cfg.grid_search && Xs.rows() >= 10) {
    // Seeded 80/20 split for the hyperparameter grid.
    std::vector<std::size_t> order(keep.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(MixSeed(cfg.seed, kStreamGp + 100));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_fit = order.size() * 4 / 5;
    std::vector<std::size_t> fit_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_fit));
    std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(n_fit), order.end());
    std::sort(fit_idx.begin(), fit_idx.end());
    Eigen::MatrixXd Xf(static_cast<Eigen::Index>(n_fit), X.cols());
    std::vector<Stage> yf;
    for (std::size_t i = 0; i < n_fit; ++i) {
      Xf.row(static_cast<Eigen::Index>(i)) = Xs.row(static_cast<Eigen::Index>(fit_idx[i]));
      yf.push_back(ys[fit_idx[i]]);
    }
    std::vector<Stage> fit_classes;
    for (Stage c : classes) {
      if (std::find(yf.begin(), yf.end(), c) != yf.end()) fit_classes.push_back(c);
    }
    double best_acc = -1;
    if (fit_classes.size() >= 2) {
      for (double sv_mult : {0.5, 1.0, 2.0}) {
        for (double ls_mult : {0.5, 1.0, 2.0}) {
          const GpModel m = FitWithHyperparameters(Xf, yf, fit_classes, cfg.signal_variance * sv_mult,
                                                   base_length * ls_mult, cfg);
          Eigen::MatrixXd Xv(static_cast<Eigen::Index>(val_idx.size()), Xs.cols());
          for (std::size_t i = 0; i < val_idx.size(); ++i) {
            Xv.row(static_cast<Eigen::Index>(i)) = Xs.row(static_cast<Eigen::Index>(val_idx[i]));
          }
          const auto val_pred = PredictGpBatch(m, Xv);
          std::size_t correct = 0;
          for (std::size_t i = 0; i < val_idx.size(); ++i) {
            if (val_pred[i].label == ys[val_idx[i]]) ++correct;
          }
          const double acc = static_cast<double>(correct) / static_cast<double>(std::max<std::size_t>(1, val_idx.size()));
          if (acc > best_acc) {
            best_acc = acc;
            best_sv = cfg.signal_variance * sv_mult;
            best_ls = base_length * ls_mult;
          }
        }
      }
      log::Info("GP grid search: signal variance " + std::to_string(best_sv) + ", length scale " +
                std::to_string(best_ls));
    }
  }
  return FitWithHyperparameters(Xs, ys, classes, best_sv, best_ls, cfg);
}

std::vector<std::pair<double, double>> PredictGpLatent(const GpModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.inputs.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "GP query has " + std::to_string(x.size()) +
                                                   " features, model expects " +
                                                   std::to_string(model.inputs.cols()));
  }
  const Eigen::VectorXd k_star =
      KernelMatrix(model.inputs, x.transpose(), model.signal_variance, model.length_scale).col(0);
  std::vector<std::pair<double, double>> out;
  out.reserve(model.classes.size());
  for (const auto& c : model.classes) {
    const double mean = k_star.dot(c.gradient);
    Eigen::VectorXd v = c.sqrt_w.cwiseProduct(k_star);
    c.chol.triangularView<Eigen::Lower>().solveInPlace(v);
    out.emplace_back(mean, model.signal_variance - v.squaredNorm());
  }
  return out;
}

std::vector<double> PredictGpBinary(const GpModel& model, const Eigen::VectorXd& x) {
  std::vector<double> out;
  for (const auto& [mean, var] : PredictGpLatent(model, x)) out.push_back(ProbitSquash(mean, var));
  return out;
}

namespace {

Prediction NormalizeBinary(const GpModel& model, std::span<const double> binary) {
  ClassProbabilities p{};
  double total = 0;
  for (double b : binary) total += b;
  for (std::size_t i = 0; i < binary.size(); ++i) {
    p[ClassIndex(model.classes[i].positive)] = binary[i] / total;
  }
  return MakePrediction(p);
}

}  // namespace

Prediction PredictGp(const GpModel& model, const Eigen::VectorXd& x) {
  const auto binary = PredictGpBinary(model, x);
  return NormalizeBinary(model, binary);
}

std::vector<Prediction> PredictGpBatch(const GpModel& model, const Eigen::MatrixXd& X) {
  if (X.rows() > 0 && X.cols() != model.inputs.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "GP query has " + std::to_string(X.cols()) +
                                                   " features, model expects " +
                                                   std::to_string(model.inputs.cols()));
  }
  constexpr Eigen::Index kBlock = 512;
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(X.rows()));
  std::vector<double> binary(model.classes.size());
  for (Eigen::Index start = 0; start < X.rows(); start += kBlock) {
    const Eigen::Index len = std::min(kBlock, X.rows() - start);
    // Columns are query points.
    const Eigen::MatrixXd k_star =
        KernelMatrix(model.inputs, X.middleRows(start, len), model.signal_variance, model.length_scale);
    Eigen::MatrixXd mean(static_cast<Eigen::Index>(model.classes.size()), len);
    Eigen::MatrixXd var(mean.rows(), len);
    for (std::size_t c = 0; c < model.classes.size(); ++c) {
      const auto& bin = model.classes[c];
      const auto row = static_cast<Eigen::Index>(c);
      mean.row(row) = bin.gradient.transpose() * k_star;
      Eigen::MatrixXd v = bin.sqrt_w.asDiagonal() * k_star;
      bin.chol.triangularView<Eigen::Lower>().solveInPlace(v);
      var.row(row) = (model.signal_variance - v.colwise().squaredNorm().array()).matrix();
    }
    for (Eigen::Index j = 0; j < len; ++j) {
      for (std::size_t c = 0; c < model.classes.size(); ++c) {
        binary[c] = ProbitSquash(mean(static_cast<Eigen::Index>(c), j), var(static_cast<Eigen::Index>(c), j));
      }
      out.push_back(NormalizeBinary(model, binary));
    }
  }
  return out;
}

}  // namespace assr
