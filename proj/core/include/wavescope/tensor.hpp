#pragma once

#include <cstddef>
#include <vector>

#include "wavescope/errors.hpp"
#include "wavescope/scalogram.hpp"

namespace wavescope {

/// Dense batch tensor, NHWC layout. Dense layers treat (1, 1, c) samples as
/// plain vectors.
struct Tensor4 {
  int n = 0, h = 0, w = 0, c = 0;
  std::vector<double> v;

  Tensor4() = default;
  Tensor4(int n_, int h_, int w_, int c_)
      : n(n_), h(h_), w(w_), c(c_),
        v(static_cast<std::size_t>(n_) * h_ * w_ * c_, 0.0) {}

  std::size_t per_sample() const { return static_cast<std::size_t>(h) * w * c; }
  std::size_t size() const { return v.size(); }

  double& at(int i, int y, int x, int ch) {
    return v[((static_cast<std::size_t>(i) * h + y) * w + x) * c + ch];
  }
  double at(int i, int y, int x, int ch) const {
    return v[((static_cast<std::size_t>(i) * h + y) * w + x) * c + ch];
  }
};

/// Stacks equally-shaped images into one batch tensor.
Tensor4 batch_from_images(const std::vector<ImageTensor>& images);

} // namespace wavescope
