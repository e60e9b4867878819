#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "assr/hmm.hpp"
#include "assr/rbm.hpp"
#include "assr/stage.hpp"
#include "assr/tf_features.hpp"

// Independent references, written from the definitions with plain loops.
namespace oracle {

using assr::kNumClasses;
using assr::kNumTfFeatures;
using assr::HmmModel;
using assr::PsdEstimate;
using assr::RbmLayer;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace tf {

constexpr double kPi = std::numbers::pi;

inline PsdEstimate Welch(const std::vector<double>& x, double fs) {
  const int seg = 128, step = 64;
  PsdEstimate out;
  std::vector<double> w(seg);
  double u = 0;
  for (int i = 0; i < seg; ++i) {
    w[i] = std::pow(std::sin(kPi * i / seg), 2);
    u += w[i] * w[i];
  }
  int segments = 0;
  out.power.assign(seg / 2 + 1, 0.0);
  for (int s = 0; s + seg <= static_cast<int>(x.size()); s += step, ++segments) {
    for (int k = 0; k <= seg / 2; ++k) {
      double re = 0, im = 0;
      for (int i = 0; i < seg; ++i) {
        const double ang = 2 * kPi * static_cast<double>(k) * i / seg;
        re += w[i] * x[s + i] * std::cos(ang);
        im -= w[i] * x[s + i] * std::sin(ang);
      }
      const double mult = (k == 0 || k == seg / 2) ? 1.0 : 2.0;
      out.power[k] += mult * (re * re + im * im) / (fs * u);
    }
  }
  for (auto& p : out.power) p /= segments;
  for (int k = 0; k <= seg / 2; ++k) out.freqs.push_back(k * fs / seg);
  return out;
}

inline double Entropy(const std::vector<double>& x, int bins) {
  const double lo = *std::min_element(x.begin(), x.end());
  const double hi = *std::max_element(x.begin(), x.end());
  if (hi == lo) return 0;
  const double width = (hi - lo) / bins;
  std::vector<int> counts(bins, 0);
  for (double v : x) {
    int j = bins - 1;
    for (int b = 0; b < bins - 1; ++b) {
      if (v < lo + (b + 1) * width) {
        j = b;
        break;
      }
    }
    counts[j]++;
  }
  double h = 0;
  for (int c : counts) {
    if (c > 0) h += -(static_cast<double>(c) / x.size()) * std::log(static_cast<double>(c) / x.size());
  }
  return h;
}

inline double Mean(const std::vector<double>& x) {
  double s = 0;
  for (double v : x) s += v;
  return s / x.size();
}

inline double CentralMoment(const std::vector<double>& x, int k) {
  const double m = Mean(x);
  double s = 0;
  for (double v : x) s += std::pow(v - m, k);
  return s / x.size();
}

inline std::vector<double> Diff(const std::vector<double>& x) {
  std::vector<double> d;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) d.push_back(x[i + 1] - x[i]);
  return d;
}

inline std::array<double, kNumTfFeatures> Features(const std::vector<double>& x) {
  std::array<double, kNumTfFeatures> f{};
  const PsdEstimate psd = Welch(x, 64);
  const double edges[6] = {0.5, 4, 8, 13, 20, 32};
  double total = 0;
  for (int b = 0; b < 5; ++b) {
    for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
      const double fr = psd.freqs[k];
      if (fr >= edges[b] && (fr < edges[b + 1] || (b == 4 && fr == 32))) f[b] += psd.power[k];
    }
    total += f[b];
  }
  for (int b = 0; b < 5; ++b) f[b] /= total;
  f[5] = Entropy(x, 32);
  double mass = 0, first = 0, second = 0;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] >= 0.5 && psd.freqs[k] <= 32) {
      mass += psd.power[k];
      first += psd.freqs[k] * psd.power[k];
    }
  }
  f[6] = first / mass;
  for (std::size_t k = 0; k < psd.freqs.size(); ++k) {
    if (psd.freqs[k] >= 0.5 && psd.freqs[k] <= 32) second += std::pow(psd.freqs[k] - f[6], 2) * psd.power[k];
  }
  f[7] = std::sqrt(second / mass);
  f[8] = psd.power[static_cast<std::size_t>(std::lround(f[6] / 0.5))];
  const auto d1 = Diff(x), d2 = Diff(d1);
  const double v0 = CentralMoment(x, 2), v1 = CentralMoment(d1, 2), v2 = CentralMoment(d2, 2);
  f[9] = v0;
  f[10] = std::sqrt(v1 / v0);
  f[11] = std::sqrt(v2 / v1) / std::sqrt(v1 / v0);
  f[12] = CentralMoment(x, 3) / std::pow(v0, 1.5);
  f[13] = CentralMoment(x, 4) / (v0 * v0);
  return f;
}

inline std::vector<double> Sine(std::size_t n, double f, double fs, double amp, double phase) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * kPi * f * static_cast<double>(i) / fs + phase);
  return x;
}

inline std::vector<double> Noise(std::mt19937_64& rng, double sd) {
  std::normal_distribution<double> d(0.0, sd);
  std::vector<double> x(384);
  for (auto& v : x) v = d(rng);
  return x;
}

// Gaussian noise plus up to three random tones, 384 samples at 64 Hz.
inline std::vector<double> RandomSubEpoch(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> x = Noise(rng, 1 + 20 * u(rng));
  const int tones = static_cast<int>(rng() % 4);
  for (int t = 0; t < tones; ++t) {
    const auto s = Sine(384, 0.5 + 31 * u(rng), 64, 50 * u(rng), 2 * kPi * u(rng));
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += s[i];
  }
  return x;
}

}  // namespace tf

namespace rbm {

inline RbmLayer RandomLayer(Eigen::Index visible, Eigen::Index hidden, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> g(0, sd);
  RbmLayer l = RbmLayer::Zeros(visible, hidden);
  for (Eigen::Index i = 0; i < l.W.size(); ++i) l.W.data()[i] = g(rng);
  for (Eigen::Index i = 0; i < l.a.size(); ++i) l.a(i) = g(rng);
  for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b(i) = g(rng);
  return l;
}

inline VectorXd Bits(int size, unsigned bits) {
  VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = (bits >> i) & 1u;
  return v;
}

inline double Energy(const RbmLayer& l, const VectorXd& v, const VectorXd& h) {
  double e = 0;
  for (int j = 0; j < h.size(); ++j) e -= l.a(j) * h(j);
  for (int i = 0; i < v.size(); ++i) e -= l.b(i) * v(i);
  for (int j = 0; j < h.size(); ++j) {
    for (int i = 0; i < v.size(); ++i) e -= h(j) * l.W(j, i) * v(i);
  }
  return e;
}

inline double Partition(const RbmLayer& l) {
  const int I = static_cast<int>(l.visible()), J = static_cast<int>(l.hidden());
  double z = 0;
  for (unsigned vb = 0; vb < (1u << I); ++vb) {
    for (unsigned hb = 0; hb < (1u << J); ++hb) z += std::exp(-Energy(l, Bits(I, vb), Bits(J, hb)));
  }
  return z;
}

inline double Marginal(const RbmLayer& l, const VectorXd& v) {
  const int J = static_cast<int>(l.hidden());
  double s = 0;
  for (unsigned hb = 0; hb < (1u << J); ++hb) s += std::exp(-Energy(l, v, Bits(J, hb)));
  return s / Partition(l);
}

inline double MeanLogLik(const RbmLayer& l, const MatrixXd& data) {
  double s = 0;
  for (int r = 0; r < data.rows(); ++r) s += std::log(Marginal(l, data.row(r).transpose()));
  return s / data.rows();
}

inline MatrixXd RandomBinary(int rows, int cols, std::mt19937_64& rng) {
  MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) m(r, c) = rng() % 2;
  }
  return m;
}

}  // namespace rbm

namespace hmm {

inline HmmModel RandomModel(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::normal_distribution<double> g(0, 1);
  HmmModel m;
  double total = 0;
  for (auto& p : m.initial) total += (p = u(rng));
  for (auto& p : m.initial) p /= total;
  for (auto& row : m.transition) {
    double s = 0;
    for (auto& p : row) s += (p = u(rng));
    for (auto& p : row) p /= s;
  }
  for (std::size_t s = 0; s < kNumClasses; ++s) {
    m.means[s] = VectorXd(dim);
    m.variances[s] = VectorXd(dim);
    for (int d = 0; d < dim; ++d) {
      m.means[s](d) = g(rng);
      m.variances[s](d) = u(rng) + 0.2;
    }
  }
  return m;
}

inline double LogGauss(const HmmModel& m, std::size_t s, const VectorXd& x) {
  double lp = 0;
  for (int d = 0; d < x.size(); ++d) {
    const double v = m.variances[s](d);
    lp += -0.5 * std::log(2 * std::numbers::pi * v) - 0.5 * std::pow(x(d) - m.means[s](d), 2) / v;
  }
  return lp;
}

inline double OracleLogProb(const HmmModel& m, const MatrixXd& seq, const std::vector<std::size_t>& path) {
  double lp = std::log(m.initial[path[0]]) + LogGauss(m, path[0], seq.row(0).transpose());
  for (std::size_t t = 1; t < path.size(); ++t) {
    lp += std::log(m.transition[path[t - 1]][path[t]]) +
          LogGauss(m, path[t], seq.row(static_cast<Eigen::Index>(t)).transpose());
  }
  return lp;
}

// Most probable state path by enumerating all 5^T paths.
inline std::vector<std::size_t> BruteForcePath(const HmmModel& m, const MatrixXd& seq, double* best_log_prob = nullptr) {
  const int T = static_cast<int>(seq.rows());
  double best = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> best_path;
  int total = 1;
  for (int t = 0; t < T; ++t) total *= 5;
  for (int code = 0; code < total; ++code) {
    std::vector<std::size_t> path(static_cast<std::size_t>(T));
    int c = code;
    for (int t = T - 1; t >= 0; --t) {
      path[static_cast<std::size_t>(t)] = static_cast<std::size_t>(c % 5);
      c /= 5;
    }
    const double lp = OracleLogProb(m, seq, path);
    if (lp > best) {
      best = lp;
      best_path = path;
    }
  }
  if (best_log_prob) *best_log_prob = best;
  return best_path;
}

}  // namespace hmm

// Majority of three labels, else the first (GP) label.
inline assr::Stage EnsembleVote(assr::Stage gp, assr::Stage rf, assr::Stage hmm) {
  if (gp == rf || gp == hmm) return gp;
  if (rf == hmm) return rf;
  return gp;
}

// Rows are noisy mixtures of a few sinusoids, squashed into [0, 1].
inline MatrixXd BandMixture(int rows, int dims, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> g(0, 0.03);
  MatrixXd m(rows, dims);
  for (int r = 0; r < rows; ++r) {
    const double f = 1 + static_cast<double>(r % 3) * 2;
    const double phase = 2 * std::numbers::pi * u(rng);
    for (int c = 0; c < dims; ++c) {
      const double s = 0.5 + 0.35 * std::sin(2 * std::numbers::pi * f * c / dims + phase) + g(rng);
      m(r, c) = std::clamp(s, 0.0, 1.0);
    }
  }
  return m;
}

}  // namespace oracle
