#pragma once

#include <span>
#include <vector>

namespace assr {

// One second-order section, a0 normalized to 1.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

using SosCascade = std::vector<Biquad>;

// Second-order IIR notch (bandwidth f0/q). Throws InvalidFrequency.
Biquad DesignNotch(double fs, double f0, double q);

// Butterworth band-pass built from an `order`-pole analog low-pass prototype
// (2*order poles in total), as `order` second-order sections. Throws InvalidBand.
SosCascade DesignButterworthBandpass(double fs, double low, double high, int order);

// Single forward pass, zero initial state.
std::vector<double> SosFilter(const SosCascade& sos, std::span<const double> x);

// Zero-phase forward-backward filtering with odd-reflection padding and
// steady-state initial conditions.
std::vector<double> SosFiltFilt(const SosCascade& sos, std::span<const double> x);

std::vector<double> NotchFilter(std::span<const double> x, double fs, double f0, double q = 30.0);
std::vector<double> BandpassFilter(std::span<const double> x, double fs, double low, double high,
                                   int order = 4);

// Polyphase rational resampler with a Kaiser-windowed sinc prototype.
// Output length is round(len * fs_out / fs_in).
std::vector<double> Resample(std::span<const double> x, double fs_in, double fs_out,
                             int taps_per_phase = 64, double kaiser_beta = 8.0);

}  // namespace assr
