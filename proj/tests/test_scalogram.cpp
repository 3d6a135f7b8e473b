#include <doctest.h>

#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <filesystem>

#include "wavescope/rng.hpp"
#include "wavescope/scalogram.hpp"

using namespace wavescope;
namespace fs = std::filesystem;

namespace {

TimeSeriesRecord random_record(int n, double fs, std::uint64_t seed) {
  TimeSeriesRecord rec;
  rec.sample_rate = fs;
  SplitMix64 rng(seed);
  rec.samples.resize(static_cast<std::size_t>(n));
  for (auto& x : rec.samples) x = rng.next_gaussian();
  return rec;
}

/// Scale whose Morse peak frequency is closest to f.
std::size_t nearest_scale_index(const WaveletParams& wp, double f) {
  std::size_t best = 0;
  double err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < wp.scales.size(); ++i) {
    const double d = std::abs(scale_peak_freq(wp, wp.scales[i]) - f);
    if (d < err) {
      err = d;
      best = i;
    }
  }
  return best;
}

} // namespace

TEST_CASE("morse filter: analytic (zero at and below omega = 0)") {
  const std::vector<double> omega{-2.0, -1e-6, 0.0, 0.5, 1.0};
  const auto h = morse_filter(20.0, 3.0, 1.0, omega);
  CHECK(h[0] == 0.0);
  CHECK(h[1] == 0.0);
  CHECK(h[2] == 0.0);
  CHECK(h[3] > 0.0);
  CHECK(h[4] > 0.0);
}

TEST_CASE("morse filter: peak at (beta/gamma)^(1/gamma), normalized to 2") {
  // dense grid argmax vs the closed form
  std::vector<double> omega;
  for (int i = 1; i <= 40000; ++i) omega.push_back(i * 1e-4);
  const auto h = morse_filter(20.0, 3.0, 1.0, omega);
  std::size_t argmax = 0;
  for (std::size_t i = 0; i < h.size(); ++i)
    if (h[i] > h[argmax]) argmax = i;
  const double peak = std::pow(20.0 / 3.0, 1.0 / 3.0); // ~1.8821
  CHECK(omega[argmax] == doctest::Approx(peak).epsilon(1e-3));
  CHECK(peak == doctest::Approx(1.8821).epsilon(1e-4));
  // exactly at the peak frequency the normalized value is the constant 2
  const auto at_peak = morse_filter(20.0, 3.0, 1.0, {peak});
  CHECK(at_peak[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("morse filter: doubling the scale halves the peak frequency") {
  std::vector<double> omega;
  for (int i = 1; i <= 40000; ++i) omega.push_back(i * 1e-4);
  auto argmax_of = [&](double scale) {
    const auto h = morse_filter(20.0, 3.0, scale, omega);
    std::size_t a = 0;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (h[i] > h[a]) a = i;
    return omega[a];
  };
  CHECK(argmax_of(2.0) == doctest::Approx(argmax_of(1.0) / 2.0).epsilon(1e-3));
}

TEST_CASE("cwt: zero signal gives all-zero coefficients") {
  TimeSeriesRecord rec;
  rec.sample_rate = 2e6;
  rec.samples.assign(1024, 0.0);
  const auto cm = cwt(rec, WaveletParams::defaults_for(2e6));
  CHECK(cm.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("cwt: toneburst magnitude peaks at its frequency and center time") {
  struct Case {
    double cycles, freq, fs;
  };
  for (const Case c : {Case{5.0, 40e3, 10e6}, Case{4.5, 60e3, 2e6}}) {
    TimeSeriesRecord rec;
    const double duration = 1e-3;
    rec = make_toneburst(c.cycles, c.freq, 1.0, c.fs, duration);
    const auto wp = WaveletParams::defaults_for(c.fs);
    const auto cm = cwt(rec, wp);
    Eigen::Index si = 0, ti = 0;
    cm.values.cwiseAbs().maxCoeff(&si, &ti);
    const double f_at_argmax = scale_peak_freq(wp, wp.scales[static_cast<std::size_t>(si)]);
    CHECK(std::abs(f_at_argmax - c.freq) / c.freq < 0.05);
    const double t_center = duration / 2.0;
    const double t_argmax = static_cast<double>(ti) / c.fs;
    CHECK(std::abs(t_argmax - t_center) / t_center < 0.05);
  }
}

TEST_CASE("cwt: linear to 1e-10 relative on random pairs") {
  const auto wp = WaveletParams::defaults_for(1e6, 16);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto x1 = random_record(512, 1e6, seed * 2 + 1);
    const auto x2 = random_record(512, 1e6, seed * 2 + 2);
    TimeSeriesRecord sum = x1;
    const double a = 0.7, b = -1.3;
    for (std::size_t i = 0; i < sum.samples.size(); ++i)
      sum.samples[i] = a * x1.samples[i] + b * x2.samples[i];
    const auto c1 = cwt(x1, wp);
    const auto c2 = cwt(x2, wp);
    const auto cs = cwt(sum, wp);
    const Eigen::MatrixXcd expect = a * c1.values + b * c2.values;
    const double rel = (cs.values - expect).cwiseAbs().maxCoeff() /
                       expect.cwiseAbs().maxCoeff();
    CHECK(rel < 1e-10);
  }
}

TEST_CASE("cwt: time-shift covariance on interior columns") {
  const double fs = 1e6;
  const auto wp = WaveletParams::defaults_for(fs, 24);
  auto burst = make_toneburst(5.0, 50e3, 1.0, fs, 2048.0 / fs);
  // place the burst off-center by rolling k samples
  const int k = 100;
  TimeSeriesRecord shifted = burst;
  for (std::size_t i = 0; i < burst.samples.size(); ++i)
    shifted.samples[(i + static_cast<std::size_t>(k)) % burst.samples.size()] = burst.samples[i];
  const Eigen::MatrixXd c0 = cwt(burst, wp).values.cwiseAbs();
  const Eigen::MatrixXd c1 = cwt(shifted, wp).values.cwiseAbs();
  // compare away from the edges
  double worst = 0.0;
  for (Eigen::Index s = 0; s < c0.rows(); ++s)
    for (Eigen::Index t = 300; t < c0.cols() - 300 - k; ++t)
      worst = std::max(worst, std::abs(c1(s, t + k) - c0(s, t)));
  CHECK(worst < 1e-9 * c0.maxCoeff() + 1e-12);
}

TEST_CASE("cwt integral flag discretizes the plain correlation integral") {
  // oracle: sample the time-domain Morse kernel (inverse transform of the
  // one-sided window), then evaluate sum_t F(t) Phi((t-b)/a) dt directly as a
  // circular correlation, no FFT on the signal path
  const double fs = 1e5;
  const int n = 256;
  const auto x = random_record(n, fs, 42);
  WaveletParams wp;
  wp.scales = {0.8e-4, 2.5e-4};
  const auto cm = cwt(x, wp, CwtNorm::integral);

  const double dt = 1.0 / fs;
  std::vector<double> omega(static_cast<std::size_t>(n), 0.0);
  for (int k = 1; k <= n / 2; ++k)
    omega[static_cast<std::size_t>(k)] = 2.0 * M_PI * k * fs / n;

  Eigen::FFT<double> fft;
  for (std::size_t s = 0; s < wp.scales.size(); ++s) {
    const auto h = morse_filter(wp.beta, wp.gamma, wp.scales[s], omega);
    std::vector<std::complex<double>> spectrum(h.begin(), h.end());
    std::vector<std::complex<double>> kernel(static_cast<std::size_t>(n));
    fft.inv(kernel, spectrum);
    double worst = 0.0, scale_mag = 0.0;
    for (int b = 0; b < n; ++b) {
      std::complex<double> acc(0.0, 0.0);
      for (int t = 0; t < n; ++t)
        acc += x.samples[static_cast<std::size_t>(t)] *
               kernel[static_cast<std::size_t>(((b - t) % n + n) % n)];
      acc *= wp.scales[s] * dt;
      const auto got = cm.values(static_cast<Eigen::Index>(s), b);
      worst = std::max(worst, std::abs(got - acc));
      scale_mag = std::max(scale_mag, std::abs(acc));
    }
    CHECK(worst < 1e-10 * scale_mag);
  }
}

TEST_CASE("to_image: all-zero coefficients give the all-zero image") {
  CoefficientMatrix cm;
  cm.values = Eigen::MatrixXcd::Zero(8, 32);
  cm.scale_axis.assign(8, 1.0);
  cm.sample_rate = 1e6;
  const auto img = to_image(cm, 16, 16, 1);
  for (double p : img.pixels) CHECK(p == 0.0);
}

TEST_CASE("to_image: paper-shape request yields 256x256x3 = 196608 values") {
  CoefficientMatrix cm;
  cm.values = Eigen::MatrixXcd::Random(16, 64);
  cm.scale_axis.assign(16, 1.0);
  cm.sample_rate = 1e6;
  const auto img = to_image(cm, 256, 256, 3);
  CHECK(img.pixels.size() == 196608);
  for (double p : img.pixels) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("to_image: single hot cell lands at level 255 in the nearest pixel") {
  CoefficientMatrix cm;
  cm.values = Eigen::MatrixXcd::Zero(16, 16);
  const int hot_r = 5, hot_c = 11;
  cm.values(hot_r, hot_c) = std::complex<double>(3.0, 4.0);
  cm.scale_axis.assign(16, 1.0);
  cm.sample_rate = 1e6;
  const auto img = to_image(cm, 64, 64, 1);
  // align-corners mapping: source row r sits at output row r*(64-1)/(16-1)
  const int out_r = static_cast<int>(std::lround(hot_r * 63.0 / 15.0));
  const int out_c = static_cast<int>(std::lround(hot_c * 63.0 / 15.0));
  int argmax_y = 0, argmax_x = 0;
  double best = -1.0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (img.at(y, x, 0) > best) {
        best = img.at(y, x, 0);
        argmax_y = y;
        argmax_x = x;
      }
  CHECK(argmax_y == out_r);
  CHECK(argmax_x == out_c);
  CHECK(img.at(out_r, out_c, 0) == 1.0);
}

TEST_CASE("to_image: output is always 256-level quantized") {
  CoefficientMatrix cm;
  cm.values = Eigen::MatrixXcd::Random(24, 100);
  cm.scale_axis.assign(24, 1.0);
  cm.sample_rate = 1e6;
  for (int channels : {1, 3}) {
    const auto img = to_image(cm, 32, 48, channels);
    for (double p : img.pixels) {
      const double level = p * 255.0;
      CHECK(std::abs(level - std::lround(level)) < 1e-9);
    }
  }
}

TEST_CASE("to_image: toneburst argmax row matches the burst scale within one step") {
  const double fs = 2e6;
  const auto rec = make_toneburst(5.0, 60e3, 1.0, fs, 1e-3);
  const auto wp = WaveletParams::defaults_for(fs);
  const auto img = to_image(cwt(rec, wp), 64, 64, 1); // 64 rows = 64 scales
  int argmax_y = 0, argmax_x = 0;
  double best = -1.0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      if (img.at(y, x, 0) > best) {
        best = img.at(y, x, 0);
        argmax_y = y;
        argmax_x = x;
      }
  const auto expect_row = static_cast<int>(nearest_scale_index(wp, 60e3));
  CHECK(std::abs(argmax_y - expect_row) <= 1);
}

TEST_CASE("flatten: row-major order and exact reshape round trip") {
  ImageTensor img;
  img.height = 2;
  img.width = 2;
  img.channels = 1;
  img.pixels = {1.0 / 255, 7.0 / 255, 31.0 / 255, 255.0 / 255};
  const auto flat = flatten(img);
  CHECK(flat == std::vector<double>{1.0 / 255, 7.0 / 255, 31.0 / 255, 1.0});
  CHECK(reshape_image(flat, 2, 2, 1) == img);

  ImageTensor big;
  big.height = 256;
  big.width = 256;
  big.channels = 1;
  big.pixels.assign(65536, 0.0);
  CHECK(flatten(big).size() == 65536);

  SplitMix64 rng(9);
  ImageTensor rnd;
  rnd.height = 8;
  rnd.width = 5;
  rnd.channels = 3;
  rnd.pixels.resize(120);
  for (auto& p : rnd.pixels) p = static_cast<double>(rng.next_u64() % 256) / 255.0;
  CHECK(reshape_image(flatten(rnd), 8, 5, 3) == rnd);
}

TEST_CASE("heat colormap endpoints and exact levels") {
  CHECK(heat_colormap(0) == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(heat_colormap(255) == std::array<std::uint8_t, 3>{255, 255, 255});
  CHECK(heat_colormap(85) == std::array<std::uint8_t, 3>{255, 0, 0});
  CHECK(heat_colormap(170) == std::array<std::uint8_t, 3>{255, 255, 0});
}

TEST_CASE("image corpus: round trip with labels") {
  std::vector<ImageTensor> images;
  SplitMix64 rng(3);
  for (int i = 0; i < 5; ++i) {
    ImageTensor img;
    img.height = 6;
    img.width = 4;
    img.channels = 1;
    img.label = i % 2 ? Label::damaged : Label::baseline;
    img.pixels.resize(24);
    for (auto& p : img.pixels) p = static_cast<double>(rng.next_u64() % 256) / 255.0;
    images.push_back(img);
  }
  const auto file = fs::temp_directory_path() / "wavescope_test_corpus.img";
  save_images(images, file);
  const auto loaded = load_images(file);
  CHECK(loaded == images);
  fs::remove(file);
}

TEST_CASE("cwt rejects invalid inputs") {
  TimeSeriesRecord rec;
  rec.sample_rate = 1e6;
  rec.samples.assign(8, 0.0);
  CHECK_THROWS_AS(cwt(rec, WaveletParams::defaults_for(1e6)), InvalidArgument); // too short
  rec.samples.assign(64, 0.0);
  rec.samples[3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(cwt(rec, WaveletParams::defaults_for(1e6)), InvalidArgument);
  WaveletParams bad;
  bad.scales = {2.0, 1.0};
  rec.samples.assign(64, 1.0);
  CHECK_THROWS_AS(cwt(rec, bad), InvalidArgument); // non-increasing scales
}
