#include "wavescope/scalogram.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <unsupported/Eigen/FFT>

#include "wavescope/bytes.hpp"

namespace wavescope {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void validate(const WaveletParams& wp) {
  if (wp.beta <= 0 || wp.gamma <= 0) throw InvalidArgument("Morse beta and gamma must be positive");
  if (wp.scales.empty()) throw InvalidArgument("scale grid is empty");
  double prev = 0.0;
  for (double a : wp.scales) {
    if (!(a > prev)) throw InvalidArgument("scales must be strictly positive and increasing");
    prev = a;
  }
}

/// log of w^beta exp(-w^gamma) relative to its peak, for w > 0.
double log_morse_rel(double beta, double gamma, double w, double log_peak_w, double peak_pow) {
  return beta * (std::log(w) - log_peak_w) - (std::pow(w, gamma) - peak_pow);
}

/// Bilinear sample at fractional (row, col), align-corners convention.
double bilinear(const Eigen::MatrixXd& m, double y, double x) {
  const int y0 = std::clamp(static_cast<int>(std::floor(y)), 0, static_cast<int>(m.rows()) - 1);
  const int x0 = std::clamp(static_cast<int>(std::floor(x)), 0, static_cast<int>(m.cols()) - 1);
  const int y1 = std::min(y0 + 1, static_cast<int>(m.rows()) - 1);
  const int x1 = std::min(x0 + 1, static_cast<int>(m.cols()) - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  return m(y0, x0) * (1 - fy) * (1 - fx) + m(y0, x1) * (1 - fy) * fx +
         m(y1, x0) * fy * (1 - fx) + m(y1, x1) * fy * fx;
}

} // namespace

double morse_peak_omega(double beta, double gamma) {
  if (beta <= 0 || gamma <= 0) throw InvalidArgument("Morse beta and gamma must be positive");
  return std::pow(beta / gamma, 1.0 / gamma);
}

double scale_peak_freq(const WaveletParams& wp, double scale) {
  return morse_peak_omega(wp.beta, wp.gamma) / (kTwoPi * scale);
}

WaveletParams WaveletParams::defaults_for(double sample_rate, int n_scales, double beta,
                                          double gamma) {
  if (sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
  if (n_scales < 2) throw InvalidArgument("need at least two scales");
  WaveletParams wp;
  wp.beta = beta;
  wp.gamma = gamma;
  const double f_hi = sample_rate / 4.0;
  const double f_lo = sample_rate / 1000.0;
  const double w_star = morse_peak_omega(wp.beta, wp.gamma);
  wp.scales.resize(static_cast<std::size_t>(n_scales));
  for (int i = 0; i < n_scales; ++i) {
    // frequency descending as scale ascends
    const double f = f_hi * std::pow(f_lo / f_hi, static_cast<double>(i) / (n_scales - 1));
    wp.scales[static_cast<std::size_t>(i)] = w_star / (kTwoPi * f);
  }
  return wp;
}

std::vector<double> morse_filter(double beta, double gamma, double scale,
                                 const std::vector<double>& omega) {
  if (beta <= 0 || gamma <= 0 || scale <= 0)
    throw InvalidArgument("Morse parameters and scale must be positive");
  const double w_star = morse_peak_omega(beta, gamma);
  const double log_peak_w = std::log(w_star);
  const double peak_pow = std::pow(w_star, gamma);
  std::vector<double> h(omega.size(), 0.0);
  for (std::size_t i = 0; i < omega.size(); ++i) {
    const double w = scale * omega[i];
    if (w <= 0) continue;
    h[i] = 2.0 * std::exp(log_morse_rel(beta, gamma, w, log_peak_w, peak_pow));
  }
  return h;
}

CoefficientMatrix cwt(const TimeSeriesRecord& rec, const WaveletParams& wp, CwtNorm norm) {
  validate(wp);
  const std::size_t n = rec.samples.size();
  if (n < 16) throw InvalidArgument("record too short for CWT (need >= 16 samples)");
  if (rec.sample_rate <= 0) throw InvalidArgument("record sample_rate must be positive");
  for (double x : rec.samples)
    if (!std::isfinite(x)) throw InvalidArgument("record contains non-finite samples");

  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> spectrum;
  fft.fwd(spectrum, rec.samples);

  // one-sided angular frequency grid; bins above Nyquist stay zero
  std::vector<double> omega(n, 0.0);
  const std::size_t half = n / 2;
  for (std::size_t k = 1; k <= half; ++k)
    omega[k] = kTwoPi * static_cast<double>(k) * rec.sample_rate / static_cast<double>(n);

  CoefficientMatrix cm;
  cm.scale_axis = wp.scales;
  cm.sample_rate = rec.sample_rate;
  cm.values.resize(static_cast<Eigen::Index>(wp.scales.size()), static_cast<Eigen::Index>(n));

  std::vector<std::complex<double>> prod(n), row(n);
  const double dt = 1.0 / rec.sample_rate;
  for (std::size_t s = 0; s < wp.scales.size(); ++s) {
    const std::vector<double> h = morse_filter(wp.beta, wp.gamma, wp.scales[s], omega);
    for (std::size_t k = 0; k < n; ++k) prod[k] = spectrum[k] * h[k];
    fft.inv(row, prod);
    const double gain = norm == CwtNorm::integral ? wp.scales[s] * dt : 1.0;
    for (std::size_t k = 0; k < n; ++k)
      cm.values(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(k)) = gain * row[k];
  }
  return cm;
}

std::array<std::uint8_t, 3> heat_colormap(std::uint8_t level) {
  const int k = 3 * static_cast<int>(level);
  auto clamp8 = [](int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); };
  return {clamp8(k), clamp8(k - 255), clamp8(k - 510)};
}

ImageTensor to_image(const CoefficientMatrix& cm, int height, int width, int channels) {
  if (channels != 1 && channels != 3) throw InvalidArgument("channels must be 1 or 3");
  if (height < 1 || width < 1) throw InvalidArgument("image dimensions must be positive");
  if (cm.values.rows() < 1 || cm.values.cols() < 1) throw InvalidArgument("empty coefficients");

  const Eigen::MatrixXd mag = cm.values.cwiseAbs();

  // bilinear resample (align corners) onto the requested grid
  Eigen::MatrixXd res(height, width);
  const double ys = height > 1 ? static_cast<double>(mag.rows() - 1) / (height - 1) : 0.0;
  const double xs = width > 1 ? static_cast<double>(mag.cols() - 1) / (width - 1) : 0.0;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) res(y, x) = bilinear(mag, y * ys, x * xs);

  const double lo = res.minCoeff();
  const double hi = res.maxCoeff();
  ImageTensor img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels.assign(static_cast<std::size_t>(height) * width * channels, 0.0);
  if (!(hi > lo)) return img; // constant magnitude -> all-zero image

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double v = (res(y, x) - lo) / (hi - lo);
      const int level = static_cast<int>(std::lround(v * 255.0));
      if (channels == 1) {
        img.at(y, x, 0) = level / 255.0;
      } else {
        const auto rgb = heat_colormap(static_cast<std::uint8_t>(level));
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = rgb[static_cast<std::size_t>(c)] / 255.0;
      }
    }
  }
  return img;
}

std::vector<double> flatten(const ImageTensor& img) { return img.pixels; }

ImageTensor reshape_image(const std::vector<double>& v, int height, int width, int channels) {
  if (v.size() != static_cast<std::size_t>(height) * width * channels)
    throw ShapeError("flattened length does not match the requested image shape");
  ImageTensor img;
  img.height = height;
  img.width = width;
  img.channels = channels;
  img.pixels = v;
  return img;
}

void save_images(const std::vector<ImageTensor>& images, const std::filesystem::path& file) {
  if (images.empty()) throw InvalidArgument("no images to save");
  const int h = images.front().height, w = images.front().width, c = images.front().channels;
  for (const auto& img : images)
    if (img.height != h || img.width != w || img.channels != c)
      throw ShapeError("image corpus must be homogeneous in shape");

  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(images.size()));
  bytes::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(h));
  bytes::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(w));
  bytes::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(c));
  for (const auto& img : images) {
    bytes::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(img.label));
    for (double p : img.pixels) {
      const int level = static_cast<int>(std::lround(p * 255.0));
      if (level < 0 || level > 255 || std::abs(p - level / 255.0) > 1e-9)
        throw InvalidArgument("pixel is not 256-level quantized");
      bytes::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(level));
    }
  }
  if (!os) throw Error("write failed on " + file.string());
}

std::vector<ImageTensor> load_images(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file.string());
  const auto count = bytes::read_le<std::uint32_t>(is, "image count");
  const auto h = bytes::read_le<std::uint16_t>(is, "height");
  const auto w = bytes::read_le<std::uint16_t>(is, "width");
  const auto c = bytes::read_le<std::uint8_t>(is, "channels");
  if (h == 0 || w == 0 || (c != 1 && c != 3))
    throw FormatError(FormatFault::malformed_header, file.string() + ": bad image header");
  std::vector<ImageTensor> images(count);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * w * c);
  for (auto& img : images) {
    const auto code = bytes::read_le<std::uint8_t>(is, "label");
    if (code > 2)
      throw FormatError(FormatFault::bad_label, file.string() + ": label code out of range");
    img.label = static_cast<Label>(code);
    img.height = h;
    img.width = w;
    img.channels = c;
    bytes::read_bytes(is, buf.data(), buf.size(), "pixels");
    img.pixels.resize(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i] / 255.0;
  }
  is.peek();
  if (!is.eof())
    throw FormatError(FormatFault::length_mismatch, file.string() + ": trailing bytes");
  return images;
}

} // namespace wavescope
