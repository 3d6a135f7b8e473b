#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "wavescope/wavegen.hpp"

namespace wavescope {

/// Generalized Morse wavelet parameters plus the analysis scale grid.
/// Scales must be strictly positive and strictly increasing.
struct WaveletParams {
  double beta = 20.0;
  double gamma = 3.0;
  std::vector<double> scales;

  /// Default grid: `n_scales` log-spaced scales whose Morse peak frequencies
  /// span [sample_rate/1000, sample_rate/4], ordered scale-ascending
  /// (frequency-descending).
  static WaveletParams defaults_for(double sample_rate, int n_scales = 64, double beta = 20.0,
                                    double gamma = 3.0);
};

/// Angular frequency (rad/s of the unit-scale filter argument) where
/// w^beta * exp(-w^gamma) peaks: (beta/gamma)^(1/gamma).
double morse_peak_omega(double beta, double gamma);

/// Morse peak frequency in Hz for one scale of the grid.
double scale_peak_freq(const WaveletParams& wp, double scale);

/// One-sided Morse window sampled on `omega` (rad/s): zero for w <= 0,
/// peak-normalized to 2 (the analytic convention).
std::vector<double> morse_filter(double beta, double gamma, double scale,
                                 const std::vector<double>& omega);

struct CoefficientMatrix {
  Eigen::MatrixXcd values; // scales x time
  std::vector<double> scale_axis;
  double sample_rate = 0.0;
};

/// `bandpass` is the analytic filter-bank output; `integral` rescales each
/// row by scale*dt so rows discretize the plain correlation integral
/// sum_t F(t) Phi((t-b)/a) dt against the time-reversed Morse kernel.
enum class CwtNorm { bandpass, integral };

/// Frequency-domain CWT: multiply the signal spectrum by the scaled Morse
/// filter and inverse-transform, one row per scale. Linear in the input.
CoefficientMatrix cwt(const TimeSeriesRecord& rec, const WaveletParams& wp,
                      CwtNorm norm = CwtNorm::bandpass);

/// Scalogram image with every pixel quantized to one of 256 levels k/255.
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels; // row-major height x width x channels
  Label label = Label::unlabeled;

  double& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const ImageTensor&) const = default;
};

/// |coefficients| -> bilinear resample to (height, width) -> per-image
/// min-max normalization -> 256-level quantization -> optional colormap.
/// A constant-magnitude matrix maps to the all-zero image.
ImageTensor to_image(const CoefficientMatrix& cm, int height, int width, int channels);

/// Fixed 256-entry heat colormap (black -> red -> yellow -> white), exact in
/// integer levels: r = min(255,3k), g = clamp(3k-255), b = clamp(3k-510).
std::array<std::uint8_t, 3> heat_colormap(std::uint8_t level);

/// Row-major (y, x, channel) flattening; reshape_image is its exact inverse.
std::vector<double> flatten(const ImageTensor& img);
ImageTensor reshape_image(const std::vector<double>& v, int height, int width, int channels);

/// Image corpus file: u32 count, u16 h, u16 w, u8 c, then per image one u8
/// label code and h*w*c quantized-level bytes. Little-endian.
void save_images(const std::vector<ImageTensor>& images, const std::filesystem::path& file);
std::vector<ImageTensor> load_images(const std::filesystem::path& file);

} // namespace wavescope
