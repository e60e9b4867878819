#include "assr/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>

#include "assr/error.hpp"

namespace assr {
namespace {

using Complex = std::complex<double>;
constexpr double kPi = std::numbers::pi;

// Steady-state DF2T state of one section for a unit step input.
std::pair<double, double> StepState(const Biquad& s) {
  const double gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
  const double z2 = s.b2 - s.a2 * gain;
  const double z1 = s.b1 - s.a1 * gain + z2;
  return {z1, z2};
}

double DcGain(const Biquad& s) { return (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2); }

void FilterInPlace(const SosCascade& sos, std::vector<double>& x, bool steady_init) {
  if (x.empty()) return;
  double scale = x.front();
  for (const auto& s : sos) {
    double z1 = 0, z2 = 0;
    if (steady_init) {
      const auto [i1, i2] = StepState(s);
      z1 = i1 * scale;
      z2 = i2 * scale;
      scale *= DcGain(s);
    }
    for (double& v : x) {
      const double y = s.b0 * v + z1;
      z1 = s.b1 * v - s.a1 * y + z2;
      z2 = s.b2 * v - s.a2 * y;
      v = y;
    }
  }
}

Complex Response(const SosCascade& sos, double omega) {
  const Complex z1 = std::polar(1.0, -omega);
  const Complex z2 = z1 * z1;
  Complex h = 1.0;
  for (const auto& s : sos) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

}  // namespace

Biquad DesignNotch(double fs, double f0, double q) {
  if (!(fs > 0) || !(f0 > 0) || f0 >= fs / 2) {
    throw Error(ErrorCode::kInvalidFrequency, "notch frequency must lie in (0, fs/2)");
  }
  if (!(q > 0)) throw Error(ErrorCode::kInvalidFrequency, "notch quality factor must be positive");
  const double w0 = 2 * kPi * f0 / fs;
  const double bw = w0 / q;
  const double g = 1.0 / (1.0 + std::tan(bw / 2));
  return {g, -2 * g * std::cos(w0), g, -2 * g * std::cos(w0), 2 * g - 1};
}

SosCascade DesignButterworthBandpass(double fs, double low, double high, int order) {
  if (!(fs > 0) || !(low > 0) || !(low < high) || !(high < fs / 2)) {
    throw Error(ErrorCode::kInvalidBand, "band must satisfy 0 < low < high < fs/2");
  }
  if (order < 1) throw Error(ErrorCode::kInvalidBand, "filter order must be positive");

  // Pre-warped analog edges.
  const double wl = 2 * fs * std::tan(kPi * low / fs);
  const double wh = 2 * fs * std::tan(kPi * high / fs);
  const double bw = wh - wl;
  const double w0 = std::sqrt(wl * wh);

  // Low-pass -> band-pass transform of the prototype poles, keeping the
  // upper-half-plane member of each conjugate pair.
  std::vector<Complex> analog;
  for (int k = 1; k <= order; ++k) {
    const Complex p = std::polar(1.0, kPi * (2.0 * k + order - 1) / (2.0 * order));
    const Complex half = p * bw / 2.0;
    const Complex root = std::sqrt(half * half - w0 * w0);
    for (const Complex s : {half + root, half - root}) {
      if (s.imag() > 0) analog.push_back(s);
    }
  }
  if (static_cast<int>(analog.size()) != order) {
    throw Error(ErrorCode::kInvalidBand, "band-pass transform produced real poles");
  }

  SosCascade sos;
  for (const Complex s : analog) {
    const Complex z = (2 * fs + s) / (2 * fs - s);
    // Zeros at z = +1 and z = -1 from the band-pass zeros at 0 and infinity.
    sos.push_back({1.0, 0.0, -1.0, -2 * z.real(), std::norm(z)});
  }
  const double center = 2 * std::atan(w0 / (2 * fs));
  const double g = 1.0 / std::abs(Response(sos, center));
  const double per_section = std::pow(g, 1.0 / order);
  for (auto& s : sos) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return sos;
}

std::vector<double> SosFilter(const SosCascade& sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  FilterInPlace(sos, y, false);
  return y;
}

std::vector<double> SosFiltFilt(const SosCascade& sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t padlen = std::min<std::size_t>(3 * (2 * sos.size() + 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2 * x[n - 1] - x[n - 1 - i]);

  FilterInPlace(sos, ext, true);
  std::reverse(ext.begin(), ext.end());
  FilterInPlace(sos, ext, true);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(padlen),
          ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

std::vector<double> NotchFilter(std::span<const double> x, double fs, double f0, double q) {
  return SosFiltFilt({DesignNotch(fs, f0, q)}, x);
}

std::vector<double> BandpassFilter(std::span<const double> x, double fs, double low, double high,
                                   int order) {
  return SosFiltFilt(DesignButterworthBandpass(fs, low, high, order), x);
}

std::vector<double> Resample(std::span<const double> x, double fs_in, double fs_out,
                             int taps_per_phase, double kaiser_beta) {
  if (!(fs_in > 0) || !(fs_out > 0)) {
    throw Error(ErrorCode::kInvalidFrequency, "sampling rates must be positive");
  }
  if (fs_in == fs_out) return {x.begin(), x.end()};

  // Rates are reduced to an integer ratio at millihertz resolution.
  const auto in_mhz = static_cast<int64_t>(std::llround(fs_in * 1000));
  const auto out_mhz = static_cast<int64_t>(std::llround(fs_out * 1000));
  const int64_t g = std::gcd(in_mhz, out_mhz);
  const int64_t up = out_mhz / g;
  const int64_t down = in_mhz / g;

  const int64_t half = static_cast<int64_t>(taps_per_phase / 2) * up;
  const int64_t ntaps = 2 * half + 1;
  const double cutoff = 0.5 / static_cast<double>(std::max(up, down));
  const double i0_beta = std::cyl_bessel_i(0.0, kaiser_beta);
  std::vector<double> h(static_cast<std::size_t>(ntaps));
  for (int64_t k = 0; k < ntaps; ++k) {
    const double t = static_cast<double>(k - half);
    const double arg = 2 * cutoff * t;
    const double sinc = t == 0 ? 1.0 : std::sin(kPi * arg) / (kPi * arg);
    const double r = t / static_cast<double>(half);
    const double w = std::cyl_bessel_i(0.0, kaiser_beta * std::sqrt(std::max(0.0, 1 - r * r))) / i0_beta;
    h[static_cast<std::size_t>(k)] = 2 * cutoff * sinc * w;
  }
  const double sum = std::accumulate(h.begin(), h.end(), 0.0);
  for (double& v : h) v *= static_cast<double>(up) / sum;

  const auto n_in = static_cast<int64_t>(x.size());
  const auto n_out = static_cast<int64_t>(
      std::llround(static_cast<double>(n_in) * static_cast<double>(up) / static_cast<double>(down)));
  std::vector<double> y(static_cast<std::size_t>(std::max<int64_t>(n_out, 0)));
  for (int64_t n = 0; n < n_out; ++n) {
    // Position on the upsampled grid, shifted by the filter delay.
    const int64_t t = n * down + half;
    int64_t j_lo = t - (ntaps - 1);
    j_lo = j_lo <= 0 ? 0 : (j_lo + up - 1) / up;
    const int64_t j_hi = std::min(t / up, n_in - 1);
    double acc = 0;
    for (int64_t j = j_lo; j <= j_hi; ++j) {
      acc += h[static_cast<std::size_t>(t - j * up)] * x[static_cast<std::size_t>(j)];
    }
    y[static_cast<std::size_t>(n)] = acc;
  }
  return y;
}

}  // namespace assr
