#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <map>
#include <numeric>

#include "assr/dsp.hpp"
#include "assr/preprocess.hpp"
#include "assr/tf_features.hpp"
#include "test_util.hpp"

using namespace assr;
using testutil::Rms;
using testutil::Sine;

TEST_CASE("notch filter") {
  const double fs = 128;
  const std::size_t n = 20 * 128;
  CHECK(NotchFilter(std::vector<double>(n, 0.0), fs, 50) == std::vector<double>(n, 0.0));

  const auto mains = Sine(n, 50, fs);
  const auto y = NotchFilter(mains, fs, 50);
  REQUIRE(y.size() == n);
  CHECK(Rms(y, 128, n - 128) <= 0.05 * Rms(mains, 128, n - 128));

  const auto alpha = Sine(n, 10, fs);
  const auto z = NotchFilter(alpha, fs, 50);
  CHECK(std::abs(Rms(z, 128, n - 128) / Rms(alpha, 128, n - 128) - 1) < 0.05);

  CHECK_THROWS_CODE(NotchFilter(alpha, fs, 64), ErrorCode::kInvalidFrequency);
  CHECK_THROWS_CODE(NotchFilter(alpha, fs, 70), ErrorCode::kInvalidFrequency);
  CHECK_THROWS_CODE(NotchFilter(alpha, fs, 0), ErrorCode::kInvalidFrequency);
}

TEST_CASE("bandpass filter") {
  const double fs = 128;
  const std::size_t n = 60 * 128;
  CHECK(BandpassFilter(std::vector<double>(n, 0.0), fs, 0.3, 32) == std::vector<double>(n, 0.0));

  const auto dc = BandpassFilter(std::vector<double>(n, 5.0), fs, 0.3, 32);
  double worst = 0;
  for (std::size_t i = 10 * 128; i < n - 10 * 128; ++i) worst = std::max(worst, std::abs(dc[i]));
  CHECK(worst <= 0.05);

  const auto alpha = Sine(n, 10, fs);
  const auto y = BandpassFilter(alpha, fs, 0.3, 32);
  CHECK(std::abs(Rms(y, 128, n - 128) / Rms(alpha, 128, n - 128) - 1) < 0.05);

  const auto high = Sine(n, 50, fs);
  CHECK(Rms(BandpassFilter(high, fs, 0.3, 32), 128, n - 128) < 0.05);

  CHECK_THROWS_CODE(BandpassFilter(alpha, fs, 32, 0.3), ErrorCode::kInvalidBand);
  CHECK_THROWS_CODE(BandpassFilter(alpha, fs, 0, 32), ErrorCode::kInvalidBand);
  CHECK_THROWS_CODE(BandpassFilter(alpha, fs, 0.3, 64), ErrorCode::kInvalidBand);
}

TEST_CASE("filters are linear") {
  std::mt19937_64 rng(17);
  const std::size_t n = 4000;
  const auto x = testutil::Gaussian(n, rng, 30);
  const auto y = testutil::Gaussian(n, rng, 5);
  const double a = 2.5, b = -0.75;
  std::vector<double> mix(n);
  for (std::size_t i = 0; i < n; ++i) mix[i] = a * x[i] + b * y[i];

  auto check = [&](auto&& f) {
    const auto fx = f(x), fy = f(y), fm = f(mix);
    REQUIRE(fx.size() == fm.size());
    double err = 0, scale = 0;
    for (std::size_t i = 0; i < fm.size(); ++i) {
      err = std::max(err, std::abs(fm[i] - (a * fx[i] + b * fy[i])));
      scale = std::max(scale, std::abs(fm[i]));
    }
    CHECK(err <= 1e-9 * scale);
  };
  check([](const std::vector<double>& v) { return NotchFilter(v, 128, 50); });
  check([](const std::vector<double>& v) { return BandpassFilter(v, 128, 0.3, 32); });
  check([](const std::vector<double>& v) { return Resample(v, 128, 64); });
  check([](const std::vector<double>& v) { return Resample(v, 100, 64); });
}

TEST_CASE("resampling") {
  std::mt19937_64 rng(1);
  const auto x = testutil::Gaussian(1000, rng);
  CHECK(Resample(x, 64, 64) == x);
  CHECK(Resample(x, 128, 64).size() == 500);
  CHECK(Resample(std::vector<double>(777, 0.0), 128, 64).size() == 389);
  CHECK(Resample(x, 100, 64).size() == 640);
  CHECK(Resample(x, 200, 64).size() == 320);
  CHECK(Resample(x, 50, 64).size() == 1280);

  // 5 Hz at 128 Hz -> 64 Hz: frequency and amplitude kept.
  const auto sine = Sine(128 * 60, 5, 128);
  const auto down = Resample(sine, 128, 64);
  const std::span<const double> mid(down.data() + 64 * 20, 384);
  const PsdEstimate psd = ComputePsd(mid, 64);
  const auto peak = std::max_element(psd.power.begin(), psd.power.end()) - psd.power.begin();
  CHECK(psd.freqs[static_cast<std::size_t>(peak)] == 5.0);
  CHECK(std::abs(Rms(down, 64 * 5, down.size() - 64 * 5) / (1 / std::sqrt(2.0)) - 1) < 0.02);

  // Upsampling keeps an in-band tone too.
  const auto slow = Sine(50 * 60, 3, 50);
  const auto up = Resample(slow, 50, 64);
  CHECK(std::abs(Rms(up, 64 * 5, up.size() - 64 * 5) / (1 / std::sqrt(2.0)) - 1) < 0.02);
}

TEST_CASE("preprocess pipeline removes mains and resamples") {
  const double fs = 128;
  const std::size_t n = 128 * 120;
  auto x = Sine(n, 6, fs, 40.0);
  const auto mains = Sine(n, 50, fs, 30.0);
  for (std::size_t i = 0; i < n; ++i) x[i] += mains[i] + 100.0;
  const auto y = PreprocessSignal(x, fs, PreprocessConfig{});
  CHECK(y.size() == n / 2);
  const auto clean = Sine(n / 2, 6, 64, 40.0);
  CHECK(std::abs(Rms(y, 64 * 10, y.size() - 64 * 10) / Rms(clean, 64 * 10, y.size() - 64 * 10) - 1) < 0.05);
  double mean = std::accumulate(y.begin() + 640, y.end() - 640, 0.0) / static_cast<double>(y.size() - 1280);
  CHECK(std::abs(mean) < 1.0);

  // A 64 Hz input cannot carry 50 Hz mains; the notch is skipped.
  const auto low = PreprocessSignal(Sine(64 * 60, 6, 64), 64, PreprocessConfig{});
  CHECK(low.size() == 64 * 60);
}

TEST_CASE("segmentation") {
  std::vector<double> x(3840);
  std::iota(x.begin(), x.end(), 0.0);
  Hypnogram h;
  h.stages = {Stage::kAwake, Stage::kNrem2};
  Segmentation s = Segment(x, h, "p");
  CHECK(s.epochs.size() == 2);
  CHECK(s.sub_epochs.size() == 10);

  x.resize(4000);
  std::iota(x.begin(), x.end(), 0.0);
  h.stages = {Stage::kAwake, Stage::kNrem2, Stage::kRem};
  s = Segment(x, h, "p");
  CHECK(s.epochs.size() == 2);

  std::vector<double> long_x(1920 * 10);
  std::iota(long_x.begin(), long_x.end(), 0.0);
  h.stages.assign(12, Stage::kSws);
  h.stages[7] = Stage::kNrem1;
  s = Segment(long_x, h, "p");
  REQUIRE(s.epochs.size() == 10);
  CHECK(s.sub_epochs.size() == 50);
  const SubEpoch& sub = s.sub_epochs[7 * 5 + 3];
  CHECK(sub.epoch_index == 7);
  CHECK(sub.slot == 3);
  CHECK(sub.label == Stage::kNrem1);
  REQUIRE(sub.samples.size() == 384);
  CHECK(sub.samples.front() == 7 * 1920 + 3 * 384);
  CHECK(sub.samples.back() == 7 * 1920 + 4 * 384 - 1);

  for (std::size_t i = 0; i < s.sub_epochs.size(); ++i) {
    const auto& se = s.sub_epochs[i];
    CHECK(se.label == s.epochs[se.epoch_index].label);
    CHECK(std::equal(se.samples.begin(), se.samples.end(),
                     s.epochs[se.epoch_index].samples.begin() + static_cast<long>(se.slot * 384)));
  }
  const auto split = SplitEpoch(s.epochs[4]);
  CHECK(split.size() == 5);

  // Hypnogram shorter than the signal.
  h.stages.assign(3, Stage::kAwake);
  CHECK(Segment(long_x, h, "p").epochs.size() == 3);
  CHECK(SegmentUnlabeled(long_x, "p").epochs.size() == 10);
  CHECK(SegmentUnlabeled(long_x, "p").epochs[0].label == Stage::kExcluded);
}

TEST_CASE("transition epochs") {
  using S = Stage;
  auto kept = [](std::vector<Stage> labels) {
    std::vector<std::size_t> out;
    const auto keep = TransitionKeepMask(labels);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      if (keep[i]) out.push_back(i);
    }
    return out;
  };
  CHECK(kept({S::kAwake, S::kAwake, S::kNrem1, S::kNrem1}) == std::vector<std::size_t>{0, 3});
  CHECK(kept({S::kRem, S::kRem, S::kRem}) == std::vector<std::size_t>{0, 1, 2});
  CHECK(kept({S::kRem, S::kAwake, S::kRem, S::kAwake}).empty());
  CHECK(kept({S::kSws, S::kSws, S::kExcluded, S::kSws, S::kSws, S::kSws}) == std::vector<std::size_t>{0, 4, 5});
  CHECK(kept({S::kAwake}) == std::vector<std::size_t>{0});
  CHECK(kept({}).empty());

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Epoch> epochs(1 + rng() % 30);
    for (std::size_t i = 0; i < epochs.size(); ++i) {
      epochs[i].epoch_index = i;
      epochs[i].label = static_cast<Stage>(rng() % 3 == 0 ? 7 : rng() % 3);
    }
    const auto out = RemoveTransitionEpochs(epochs);
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].epoch_index < out[i].epoch_index);
    for (const auto& e : out) {
      const std::size_t i = e.epoch_index;
      CHECK(e.label != Stage::kExcluded);
      if (i > 0) CHECK(epochs[i - 1].label == e.label);
      if (i + 1 < epochs.size()) CHECK(epochs[i + 1].label == e.label);
    }
  }
}

TEST_CASE("stage merge") {
  CHECK(MergeStage(Stage::kNrem3) == Stage::kSws);
  CHECK(MergeStage(Stage::kNrem4) == Stage::kSws);
  CHECK(MergeStage(Stage::kRem) == Stage::kRem);
  CHECK(MergeStage(Stage::kAwake) == Stage::kAwake);
  CHECK_THROWS_CODE(MergeStage(Stage::kExcluded), ErrorCode::kExcludedLabel);
}

TEST_CASE("class balancing") {
  std::vector<Epoch> epochs;
  auto add = [&](Stage s, int n) {
    for (int i = 0; i < n; ++i) {
      Epoch e;
      e.epoch_index = epochs.size();
      e.label = s;
      epochs.push_back(e);
    }
  };
  add(Stage::kAwake, 10);
  add(Stage::kNrem1, 4);
  add(Stage::kNrem2, 8);
  std::shuffle(epochs.begin(), epochs.end(), std::mt19937_64(4));

  const auto out = BalanceClasses(epochs, 99);
  std::map<Stage, int> counts;
  for (const auto& e : out) ++counts[e.label];
  CHECK(counts[Stage::kAwake] == 4);
  CHECK(counts[Stage::kNrem1] == 4);
  CHECK(counts[Stage::kNrem2] == 4);
  CHECK(out.size() == 12);

  const auto again = BalanceClasses(epochs, 99);
  REQUIRE(again.size() == out.size());
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].epoch_index == out[i].epoch_index);

  // Output keeps input order.
  std::vector<std::size_t> pos;
  for (const auto& e : out) {
    pos.push_back(static_cast<std::size_t>(
        std::find_if(epochs.begin(), epochs.end(), [&](const Epoch& x) { return x.epoch_index == e.epoch_index; }) -
        epochs.begin()));
  }
  CHECK(std::is_sorted(pos.begin(), pos.end()));

  std::vector<Epoch> balanced;
  for (int i = 0; i < 6; ++i) {
    Epoch e;
    e.epoch_index = static_cast<std::size_t>(i);
    e.label = i % 2 ? Stage::kSws : Stage::kRem;
    balanced.push_back(e);
  }
  const auto same = BalanceClasses(balanced, 5);
  CHECK(same.size() == 6);

  CHECK_THROWS_CODE(BalanceClasses({}, 1), ErrorCode::kEmptyInput);
  Epoch bad;
  bad.label = Stage::kExcluded;
  CHECK_THROWS_CODE(BalanceClasses({bad}, 1), ErrorCode::kExcludedLabel);

  // Different seeds pick different subsets (with overwhelming probability).
  std::vector<Stage> labels;
  for (int i = 0; i < 200; ++i) labels.push_back(i < 20 ? Stage::kAwake : Stage::kNrem2);
  CHECK(BalancedSelection(labels, 1) != BalancedSelection(labels, 2));
}

TEST_CASE("preprocess config validation") {
  PreprocessConfig cfg;
  CHECK_NOTHROW(ValidatePreprocessConfig(cfg));
  cfg.band_high = 40;
  CHECK_THROWS_CODE(ValidatePreprocessConfig(cfg), ErrorCode::kInvalidConfig);
  cfg = {};
  cfg.band_low = 0;
  CHECK_THROWS_CODE(ValidatePreprocessConfig(cfg), ErrorCode::kInvalidConfig);
}
