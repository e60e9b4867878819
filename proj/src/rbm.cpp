#include "assr/rbm.hpp"

#include <cmath>
#include <string>

#include "assr/error.hpp"

namespace assr {
namespace {

void CheckShapes(const RbmLayer& layer, Eigen::Index v_size, Eigen::Index h_size) {
  if (layer.a.size() != layer.hidden() || layer.b.size() != layer.visible()) {
    throw Error(ErrorCode::kDimensionMismatch, "RBM bias sizes disagree with W");
  }
  if (v_size >= 0 && v_size != layer.visible()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "visible vector has " + std::to_string(v_size) + " entries, layer expects " +
                    std::to_string(layer.visible()));
  }
  if (h_size >= 0 && h_size != layer.hidden()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "hidden vector has " + std::to_string(h_size) + " entries, layer expects " +
                    std::to_string(layer.hidden()));
  }
}

void CheckEnumerable(const RbmLayer& layer) {
  if (layer.visible() + layer.hidden() > kMaxEnumerableUnits) {
    throw Error(ErrorCode::kTooLarge, "enumeration needs visible + hidden <= 20");
  }
}

Eigen::VectorXd BinaryState(Eigen::Index size, uint64_t bits) {
  Eigen::VectorXd v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = static_cast<double>((bits >> i) & 1u);
  return v;
}

// log sum_h exp(-E(v,h)) = b'v + sum_j softplus(W_j v + a_j).
double NegFreeEnergy(const RbmLayer& layer, const Eigen::VectorXd& v) {
  const Eigen::VectorXd act = layer.W * v + layer.a;
  double out = layer.b.dot(v);
  for (Eigen::Index j = 0; j < act.size(); ++j) {
    const double x = act(j);
    out += x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  }
  return out;
}

double LogSumExp(const std::vector<double>& xs) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : xs) m = std::max(m, x);
  double s = 0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

Eigen::MatrixXd SigmoidMat(Eigen::MatrixXd x) {
  return x.unaryExpr([](double t) { return Sigmoid(t); });
}

Eigen::MatrixXd SampleBernoulli(const Eigen::MatrixXd& p, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd s(p.rows(), p.cols());
  // Column-major storage; fixed traversal order keeps the stream reproducible.
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    for (Eigen::Index r = 0; r < p.rows(); ++r) s(r, c) = unit(rng) < p(r, c) ? 1.0 : 0.0;
  }
  return s;
}

}  // namespace

RbmLayer RbmLayer::Zeros(Eigen::Index visible, Eigen::Index hidden) {
  return {Eigen::MatrixXd::Zero(hidden, visible), Eigen::VectorXd::Zero(hidden),
          Eigen::VectorXd::Zero(visible)};
}

double RbmEnergy(const RbmLayer& layer, const Eigen::VectorXd& v, const Eigen::VectorXd& h) {
  CheckShapes(layer, v.size(), h.size());
  return -layer.a.dot(h) - layer.b.dot(v) - h.dot(layer.W * v);
}

double RbmLogPartition(const RbmLayer& layer) {
  CheckShapes(layer, -1, -1);
  CheckEnumerable(layer);
  std::vector<double> terms;
  const uint64_t n_states = uint64_t{1} << layer.visible();
  terms.reserve(n_states);
  for (uint64_t bits = 0; bits < n_states; ++bits) {
    terms.push_back(NegFreeEnergy(layer, BinaryState(layer.visible(), bits)));
  }
  return LogSumExp(terms);
}

double RbmJointProb(const RbmLayer& layer, const Eigen::VectorXd& v, const Eigen::VectorXd& h) {
  CheckShapes(layer, v.size(), h.size());
  CheckEnumerable(layer);
  return std::exp(-RbmEnergy(layer, v, h) - RbmLogPartition(layer));
}

double RbmMeanLogLikelihood(const RbmLayer& layer, const Eigen::MatrixXd& data) {
  CheckShapes(layer, data.cols(), -1);
  const double log_z = RbmLogPartition(layer);
  double total = 0;
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    total += NegFreeEnergy(layer, data.row(r).transpose()) - log_z;
  }
  return total / static_cast<double>(data.rows());
}

Eigen::VectorXd HiddenGivenVisible(const RbmLayer& layer, const Eigen::VectorXd& v) {
  CheckShapes(layer, v.size(), -1);
  return SigmoidMat(layer.W * v + layer.a);
}

Eigen::VectorXd VisibleGivenHidden(const RbmLayer& layer, const Eigen::VectorXd& h) {
  CheckShapes(layer, -1, h.size());
  return SigmoidMat(layer.W.transpose() * h + layer.b);
}

Eigen::MatrixXd HiddenProbs(const RbmLayer& layer, const Eigen::MatrixXd& v) {
  CheckShapes(layer, v.cols(), -1);
  Eigen::MatrixXd act = v * layer.W.transpose();
  act.rowwise() += layer.a.transpose();
  return SigmoidMat(std::move(act));
}

Eigen::MatrixXd VisibleProbs(const RbmLayer& layer, const Eigen::MatrixXd& h) {
  CheckShapes(layer, -1, h.cols());
  Eigen::MatrixXd act = h * layer.W;
  act.rowwise() += layer.b.transpose();
  return SigmoidMat(std::move(act));
}

RbmGradient ExactLoglikGradient(const RbmLayer& layer, const Eigen::MatrixXd& data) {
  CheckShapes(layer, data.cols(), -1);
  CheckEnumerable(layer);
  if (data.rows() == 0) throw Error(ErrorCode::kEmptyData, "no data rows");
  const Eigen::Index I = layer.visible();

  // Data term.
  const Eigen::MatrixXd hd = HiddenProbs(layer, data);
  const double inv_n = 1.0 / static_cast<double>(data.rows());
  Eigen::MatrixXd dW = hd.transpose() * data * inv_n;
  Eigen::VectorXd da = hd.colwise().mean().transpose();
  Eigen::VectorXd db = data.colwise().mean().transpose();

  // Model term: sum over visible states of P(v) [v, P(h|v)] outer products.
  const double log_z = RbmLogPartition(layer);
  const uint64_t n_states = uint64_t{1} << I;
  for (uint64_t bits = 0; bits < n_states; ++bits) {
    const Eigen::VectorXd v = BinaryState(I, bits);
    const double pv = std::exp(NegFreeEnergy(layer, v) - log_z);
    const Eigen::VectorXd ph = SigmoidMat(layer.W * v + layer.a);
    dW -= pv * ph * v.transpose();
    da -= pv * ph;
    db -= pv * v;
  }
  return {std::move(dW), std::move(da), std::move(db)};
}

RbmGradient CdGradient(const RbmLayer& layer, const Eigen::MatrixXd& batch, const CdParams& params,
                       Rng& rng) {
  CheckShapes(layer, batch.cols(), -1);
  if (batch.rows() == 0) throw Error(ErrorCode::kEmptyData, "empty batch");
  if (params.k < 1) throw Error(ErrorCode::kInvalidConfig, "cd_k must be >= 1");
  const double inv_n = 1.0 / static_cast<double>(batch.rows());

  const Eigen::MatrixXd h0 = HiddenProbs(layer, batch);
  Eigen::MatrixXd h_state = SampleBernoulli(h0, rng);
  Eigen::MatrixXd v_k;
  Eigen::MatrixXd h_k;
  for (int step = 0; step < params.k; ++step) {
    const Eigen::MatrixXd pv = VisibleProbs(layer, h_state);
    v_k = params.sample_visible ? SampleBernoulli(pv, rng) : pv;
    h_k = HiddenProbs(layer, v_k);
    if (step + 1 < params.k) h_state = SampleBernoulli(h_k, rng);
  }

  RbmGradient g;
  g.dW = (h0.transpose() * batch - h_k.transpose() * v_k) * inv_n;
  g.da = (h0.colwise().sum() - h_k.colwise().sum()).transpose() * inv_n;
  g.db = (batch.colwise().sum() - v_k.colwise().sum()).transpose() * inv_n;
  return g;
}

RbmLayer CdUpdate(const RbmLayer& layer, const Eigen::MatrixXd& batch, const CdStep& step,
                  RbmGradient& velocity, Rng& rng) {
  const RbmGradient g = CdGradient(layer, batch, step.cd, rng);
  if (velocity.dW.size() == 0) {
    velocity = {Eigen::MatrixXd::Zero(layer.hidden(), layer.visible()),
                Eigen::VectorXd::Zero(layer.hidden()), Eigen::VectorXd::Zero(layer.visible())};
  }
  velocity.dW = step.momentum * velocity.dW + step.learning_rate * g.dW;
  velocity.da = step.momentum * velocity.da + step.learning_rate * g.da;
  velocity.db = step.momentum * velocity.db + step.learning_rate * g.db;
  RbmLayer out = layer;
  out.W += velocity.dW;
  out.a += velocity.da;
  out.b += velocity.db;
  return out;
}

}  // namespace assr
