#include "wavescope/cae.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "wavescope/bytes.hpp"
#include "wavescope/rng.hpp"

namespace wavescope {

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

namespace {

void apply_activation(Activation act, double slope, std::vector<double>& buf,
                      std::vector<double>* cache) {
  switch (act) {
    case Activation::linear:
      if (cache) cache->clear();
      return;
    case Activation::leaky_relu:
      if (cache) *cache = buf; // pre-activation
      for (auto& x : buf)
        if (x < 0) x *= slope;
      return;
    case Activation::sigmoid:
      for (auto& x : buf) x = 1.0 / (1.0 + std::exp(-x));
      if (cache) *cache = buf; // output
      return;
  }
}

void activation_grad_inplace(Activation act, double slope, const std::vector<double>& cache,
                             std::vector<double>& grad) {
  switch (act) {
    case Activation::linear:
      return;
    case Activation::leaky_relu:
      for (std::size_t i = 0; i < grad.size(); ++i)
        if (cache[i] <= 0) grad[i] *= slope;
      return;
    case Activation::sigmoid:
      for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= cache[i] * (1.0 - cache[i]);
      return;
  }
}

/// Gather: matrix over the stride grid of `img`, one row per (sample, gy, gx),
/// one column per (u, v, channel). Entries outside the padded image are zero.
Eigen::MatrixXd im2col(const Tensor4& img, int k, int s, int p, int grid_h, int grid_w) {
  const int kk = k * k;
  Eigen::MatrixXd m(static_cast<Eigen::Index>(img.n) * grid_h * grid_w,
                    static_cast<Eigen::Index>(kk) * img.c);
  m.setZero();
  for (int i = 0; i < img.n; ++i)
    for (int gy = 0; gy < grid_h; ++gy)
      for (int gx = 0; gx < grid_w; ++gx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(i) * grid_h + gy) * grid_w + gx;
        for (int u = 0; u < k; ++u) {
          const int y = gy * s + u - p;
          if (y < 0 || y >= img.h) continue;
          for (int v = 0; v < k; ++v) {
            const int x = gx * s + v - p;
            if (x < 0 || x >= img.w) continue;
            const double* src = &img.v[((static_cast<std::size_t>(i) * img.h + y) * img.w + x) *
                                       img.c];
            const Eigen::Index q0 = static_cast<Eigen::Index>(u * k + v) * img.c;
            for (int ch = 0; ch < img.c; ++ch) m(row, q0 + ch) = src[ch];
          }
        }
      }
  return m;
}

/// Exact adjoint of im2col: scatter-add the matrix back into an image.
void col2im(const Eigen::MatrixXd& m, Tensor4& img, int k, int s, int p, int grid_h,
            int grid_w) {
  for (int i = 0; i < img.n; ++i)
    for (int gy = 0; gy < grid_h; ++gy)
      for (int gx = 0; gx < grid_w; ++gx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(i) * grid_h + gy) * grid_w + gx;
        for (int u = 0; u < k; ++u) {
          const int y = gy * s + u - p;
          if (y < 0 || y >= img.h) continue;
          for (int v = 0; v < k; ++v) {
            const int x = gx * s + v - p;
            if (x < 0 || x >= img.w) continue;
            double* dst =
                &img.v[((static_cast<std::size_t>(i) * img.h + y) * img.w + x) * img.c];
            const Eigen::Index q0 = static_cast<Eigen::Index>(u * k + v) * img.c;
            for (int ch = 0; ch < img.c; ++ch) dst[ch] += m(row, q0 + ch);
          }
        }
      }
}

ParamView view(std::vector<double>& v) { return {v.data(), v.size()}; }

/// Sigmoid-activated layers start their bias at logit(0.02): scalogram-like
/// targets are mostly dark, and a zero bias would make Adam spend thousands
/// of steps just driving the background down.
double initial_bias(Activation act) {
  return act == Activation::sigmoid ? std::log(0.02 / 0.98) : 0.0;
}

std::string shape_str(Shape3 s) {
  std::ostringstream os;
  os << "(" << s.h << "," << s.w << "," << s.c << ")";
  return os.str();
}

} // namespace

class Layer {
public:
  explicit Layer(const LayerSpec& spec) : spec_(spec) {}
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  Shape3 in_shape() const { return in_shape_; }
  Shape3 out_shape() const { return out_shape_; }

  virtual Shape3 plan(Shape3 in) = 0; // shape propagation + validation
  virtual void init(SplitMix64&) {}
  virtual Tensor4 forward(const Tensor4& x, bool train) = 0;
  virtual Tensor4 infer(const Tensor4& x) const = 0;
  virtual Tensor4 backward(const Tensor4& dy) = 0;
  virtual void collect_params(std::vector<ParamView>&) {}
  virtual void collect_grads(std::vector<ParamView>&) {}
  virtual void zero_grad() {}
  virtual long param_count() const { return 0; }
  virtual std::string describe() const = 0;
  virtual void save_params(std::ostream&) const {}
  virtual void load_params(std::istream&) {}

protected:
  LayerSpec spec_;
  Shape3 in_shape_{}, out_shape_{};
};

namespace {

class Conv2d final : public Layer {
public:
  using Layer::Layer;

  Shape3 plan(Shape3 in) override {
    const int k = spec_.kernel_h, s = spec_.stride;
    if (spec_.kernel_h != spec_.kernel_w) throw ShapeError("conv2d: only square kernels");
    if (k < 1 || s < 1 || spec_.filters < 1) throw ShapeError("conv2d: bad kernel/stride/filters");
    if (k % 2 == 0) throw ShapeError("conv2d: kernel must be odd for symmetric padding");
    if (s == 2 && (in.h % 2 || in.w % 2))
      throw ShapeError("conv2d: stride-2 halving requires even input dims, got " + shape_str(in));
    in_shape_ = in;
    pad_ = (k - 1) / 2;
    out_shape_ = {(in.h + 2 * pad_ - k) / s + 1, (in.w + 2 * pad_ - k) / s + 1, spec_.filters};
    weights_.assign(static_cast<std::size_t>(k) * k * in.c * spec_.filters, 0.0);
    bias_.assign(static_cast<std::size_t>(spec_.filters), 0.0);
    grad_w_.assign(weights_.size(), 0.0);
    grad_b_.assign(bias_.size(), 0.0);
    return out_shape_;
  }

  void init(SplitMix64& rng) override {
    const double std_dev =
        std::sqrt(2.0 / (static_cast<double>(spec_.kernel_h) * spec_.kernel_w * in_shape_.c));
    for (auto& w : weights_) w = std_dev * rng.next_gaussian();
    for (auto& b : bias_) b = initial_bias(spec_.act);
  }

  Tensor4 infer(const Tensor4& x) const override { return compute(x, nullptr, nullptr); }

  Tensor4 forward(const Tensor4& x, bool train) override {
    if (!train) return compute(x, nullptr, nullptr);
    return compute(x, &col_cache_, &act_cache_);
  }

  Tensor4 backward(const Tensor4& dy) override {
    const int cout = spec_.filters;
    std::vector<double> dz = dy.v;
    activation_grad_inplace(spec_.act, spec_.slope, act_cache_, dz);
    const Eigen::Index rows = static_cast<Eigen::Index>(dy.n) * dy.h * dy.w;
    CMapRM dZ(dz.data(), rows, cout);
    CMapRM W(weights_.data(), static_cast<Eigen::Index>(spec_.kernel_h) * spec_.kernel_w *
                                  in_shape_.c,
             cout);
    MapRM dW(grad_w_.data(), W.rows(), W.cols());
    dW.noalias() += col_cache_.transpose() * dZ;
    for (int co = 0; co < cout; ++co) grad_b_[static_cast<std::size_t>(co)] += dZ.col(co).sum();
    const Eigen::MatrixXd dcol = dZ * W.transpose();
    Tensor4 dx(dy.n, in_shape_.h, in_shape_.w, in_shape_.c);
    col2im(dcol, dx, spec_.kernel_h, spec_.stride, pad_, out_shape_.h, out_shape_.w);
    return dx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back(view(weights_));
    out.push_back(view(bias_));
  }
  void collect_grads(std::vector<ParamView>& out) override {
    out.push_back(view(grad_w_));
    out.push_back(view(grad_b_));
  }
  void zero_grad() override {
    std::fill(grad_w_.begin(), grad_w_.end(), 0.0);
    std::fill(grad_b_.begin(), grad_b_.end(), 0.0);
  }
  long param_count() const override {
    return static_cast<long>(weights_.size() + bias_.size());
  }
  std::string describe() const override {
    std::ostringstream os;
    os << "Conv2D(" << spec_.filters << ", " << spec_.kernel_h << "x" << spec_.kernel_w
       << ", s" << spec_.stride << ")";
    return os.str();
  }
  void save_params(std::ostream& os) const override {
    for (double w : weights_) bytes::write_le<double>(os, w);
    for (double b : bias_) bytes::write_le<double>(os, b);
  }
  void load_params(std::istream& is) override {
    for (auto& w : weights_) w = bytes::read_le<double>(is, "conv weight");
    for (auto& b : bias_) b = bytes::read_le<double>(is, "conv bias");
  }

private:
  Tensor4 compute(const Tensor4& x, Eigen::MatrixXd* col_out,
                  std::vector<double>* act_cache) const {
    Eigen::MatrixXd col =
        im2col(x, spec_.kernel_h, spec_.stride, pad_, out_shape_.h, out_shape_.w);
    Tensor4 y(x.n, out_shape_.h, out_shape_.w, out_shape_.c);
    CMapRM W(weights_.data(), col.cols(), spec_.filters);
    MapRM Y(y.v.data(), col.rows(), spec_.filters);
    Y.noalias() = col * W;
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias_.data(),
                                                        static_cast<Eigen::Index>(bias_.size()));
    apply_activation(spec_.act, spec_.slope, y.v, act_cache);
    if (col_out) *col_out = std::move(col);
    return y;
  }

  std::vector<double> weights_, bias_, grad_w_, grad_b_;
  Eigen::MatrixXd col_cache_;
  std::vector<double> act_cache_;
  int pad_ = 1;
};

class ConvTranspose2d final : public Layer {
public:
  using Layer::Layer;

  Shape3 plan(Shape3 in) override {
    const int k = spec_.kernel_h, s = spec_.stride;
    if (spec_.kernel_h != spec_.kernel_w) throw ShapeError("conv2d_transpose: only square kernels");
    if (k < 1 || s < 1 || spec_.filters < 1)
      throw ShapeError("conv2d_transpose: bad kernel/stride/filters");
    if (k % 2 == 0) throw ShapeError("conv2d_transpose: kernel must be odd");
    in_shape_ = in;
    pad_ = (k - 1) / 2;
    // output padding s-1 makes stride-s exactly multiply spatial dims
    out_shape_ = {in.h * s, in.w * s, spec_.filters};
    weights_.assign(static_cast<std::size_t>(in.c) * k * k * spec_.filters, 0.0);
    bias_.assign(static_cast<std::size_t>(spec_.filters), 0.0);
    grad_w_.assign(weights_.size(), 0.0);
    grad_b_.assign(bias_.size(), 0.0);
    return out_shape_;
  }

  void init(SplitMix64& rng) override {
    const double std_dev =
        std::sqrt(2.0 / (static_cast<double>(spec_.kernel_h) * spec_.kernel_w * in_shape_.c));
    for (auto& w : weights_) w = std_dev * rng.next_gaussian();
    for (auto& b : bias_) b = initial_bias(spec_.act);
  }

  Tensor4 infer(const Tensor4& x) const override { return compute(x, nullptr); }

  Tensor4 forward(const Tensor4& x, bool train) override {
    if (!train) return compute(x, nullptr);
    in_cache_ = x;
    return compute(x, &act_cache_);
  }

  Tensor4 backward(const Tensor4& dy) override {
    const int cout = spec_.filters, cin = in_shape_.c;
    std::vector<double> dz = dy.v;
    activation_grad_inplace(spec_.act, spec_.slope, act_cache_, dz);
    Tensor4 dz_t(dy.n, dy.h, dy.w, dy.c);
    dz_t.v = std::move(dz);
    // dD[(i,gy,gx), (u,v,co)] = dz at the scattered position
    const Eigen::MatrixXd dD =
        im2col(dz_t, spec_.kernel_h, spec_.stride, pad_, in_shape_.h, in_shape_.w);
    const Eigen::Index in_rows = static_cast<Eigen::Index>(dy.n) * in_shape_.h * in_shape_.w;
    CMapRM X(in_cache_.v.data(), in_rows, cin);
    CMapRM W(weights_.data(), cin,
             static_cast<Eigen::Index>(spec_.kernel_h) * spec_.kernel_w * cout);
    MapRM dW(grad_w_.data(), W.rows(), W.cols());
    dW.noalias() += X.transpose() * dD;
    for (int co = 0; co < cout; ++co) {
      double s = 0.0;
      for (std::size_t i = static_cast<std::size_t>(co); i < dz_t.v.size();
           i += static_cast<std::size_t>(cout))
        s += dz_t.v[i];
      grad_b_[static_cast<std::size_t>(co)] += s;
    }
    Tensor4 dx(dy.n, in_shape_.h, in_shape_.w, in_shape_.c);
    MapRM dX(dx.v.data(), in_rows, cin);
    dX.noalias() = dD * W.transpose();
    return dx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back(view(weights_));
    out.push_back(view(bias_));
  }
  void collect_grads(std::vector<ParamView>& out) override {
    out.push_back(view(grad_w_));
    out.push_back(view(grad_b_));
  }
  void zero_grad() override {
    std::fill(grad_w_.begin(), grad_w_.end(), 0.0);
    std::fill(grad_b_.begin(), grad_b_.end(), 0.0);
  }
  long param_count() const override {
    return static_cast<long>(weights_.size() + bias_.size());
  }
  std::string describe() const override {
    std::ostringstream os;
    os << "Conv2DT(" << spec_.filters << ", " << spec_.kernel_h << "x" << spec_.kernel_w
       << ", s" << spec_.stride << ")";
    return os.str();
  }
  void save_params(std::ostream& os) const override {
    for (double w : weights_) bytes::write_le<double>(os, w);
    for (double b : bias_) bytes::write_le<double>(os, b);
  }
  void load_params(std::istream& is) override {
    for (auto& w : weights_) w = bytes::read_le<double>(is, "convT weight");
    for (auto& b : bias_) b = bytes::read_le<double>(is, "convT bias");
  }

private:
  Tensor4 compute(const Tensor4& x, std::vector<double>* act_cache) const {
    const int cout = spec_.filters, cin = in_shape_.c;
    const Eigen::Index in_rows = static_cast<Eigen::Index>(x.n) * x.h * x.w;
    CMapRM X(x.v.data(), in_rows, cin);
    CMapRM W(weights_.data(), cin,
             static_cast<Eigen::Index>(spec_.kernel_h) * spec_.kernel_w * cout);
    const Eigen::MatrixXd D = X * W;
    Tensor4 y(x.n, out_shape_.h, out_shape_.w, cout);
    for (int i = 0; i < x.n; ++i)
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx)
          for (int co = 0; co < cout; ++co)
            y.at(i, yy, xx, co) = bias_[static_cast<std::size_t>(co)];
    col2im(D, y, spec_.kernel_h, spec_.stride, pad_, x.h, x.w);
    apply_activation(spec_.act, spec_.slope, y.v, act_cache);
    return y;
  }

  std::vector<double> weights_, bias_, grad_w_, grad_b_;
  Tensor4 in_cache_;
  std::vector<double> act_cache_;
  int pad_ = 1;
};

class BatchNorm final : public Layer {
public:
  using Layer::Layer;

  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.99;

  Shape3 plan(Shape3 in) override {
    in_shape_ = out_shape_ = in;
    const auto c = static_cast<std::size_t>(in.c);
    gamma_.assign(c, 1.0);
    beta_.assign(c, 0.0);
    running_mean_.assign(c, 0.0);
    running_var_.assign(c, 1.0);
    grad_gamma_.assign(c, 0.0);
    grad_beta_.assign(c, 0.0);
    return out_shape_;
  }

  Tensor4 infer(const Tensor4& x) const override {
    Tensor4 y = x;
    const int c = in_shape_.c;
    std::vector<double> scale(static_cast<std::size_t>(c)), shift(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
      const auto u = static_cast<std::size_t>(ch);
      scale[u] = gamma_[u] / std::sqrt(running_var_[u] + kEps);
      shift[u] = beta_[u] - running_mean_[u] * scale[u];
    }
    for (std::size_t i = 0; i < y.v.size(); ++i) {
      const auto u = i % static_cast<std::size_t>(c);
      y.v[i] = y.v[i] * scale[u] + shift[u];
    }
    return y;
  }

  Tensor4 forward(const Tensor4& x, bool train) override {
    if (!train) return infer(x);
    const int c = in_shape_.c;
    const std::size_t m = x.v.size() / static_cast<std::size_t>(c);
    std::vector<double> mean(static_cast<std::size_t>(c), 0.0);
    std::vector<double> var(static_cast<std::size_t>(c), 0.0);
    for (std::size_t i = 0; i < x.v.size(); ++i) mean[i % static_cast<std::size_t>(c)] += x.v[i];
    for (auto& v : mean) v /= static_cast<double>(m);
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      const auto u = i % static_cast<std::size_t>(c);
      const double d = x.v[i] - mean[u];
      var[u] += d * d;
    }
    for (auto& v : var) v /= static_cast<double>(m); // biased, also kept in running stats

    inv_std_.resize(static_cast<std::size_t>(c));
    for (int ch = 0; ch < c; ++ch) {
      const auto u = static_cast<std::size_t>(ch);
      inv_std_[u] = 1.0 / std::sqrt(var[u] + kEps);
      running_mean_[u] = kMomentum * running_mean_[u] + (1.0 - kMomentum) * mean[u];
      running_var_[u] = kMomentum * running_var_[u] + (1.0 - kMomentum) * var[u];
    }
    Tensor4 y = x;
    x_hat_.resize(x.v.size());
    for (std::size_t i = 0; i < x.v.size(); ++i) {
      const auto u = i % static_cast<std::size_t>(c);
      x_hat_[i] = (x.v[i] - mean[u]) * inv_std_[u];
      y.v[i] = gamma_[u] * x_hat_[i] + beta_[u];
    }
    count_ = m;
    return y;
  }

  Tensor4 backward(const Tensor4& dy) override {
    const int c = in_shape_.c;
    const double m = static_cast<double>(count_);
    std::vector<double> sum_dy(static_cast<std::size_t>(c), 0.0);
    std::vector<double> sum_dy_xhat(static_cast<std::size_t>(c), 0.0);
    for (std::size_t i = 0; i < dy.v.size(); ++i) {
      const auto u = i % static_cast<std::size_t>(c);
      sum_dy[u] += dy.v[i];
      sum_dy_xhat[u] += dy.v[i] * x_hat_[i];
    }
    for (int ch = 0; ch < c; ++ch) {
      const auto u = static_cast<std::size_t>(ch);
      grad_beta_[u] += sum_dy[u];
      grad_gamma_[u] += sum_dy_xhat[u];
    }
    Tensor4 dx = dy;
    for (std::size_t i = 0; i < dy.v.size(); ++i) {
      const auto u = i % static_cast<std::size_t>(c);
      dx.v[i] = gamma_[u] * inv_std_[u] *
                (dy.v[i] - sum_dy[u] / m - x_hat_[i] * sum_dy_xhat[u] / m);
    }
    return dx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back(view(gamma_));
    out.push_back(view(beta_));
  }
  void collect_grads(std::vector<ParamView>& out) override {
    out.push_back(view(grad_gamma_));
    out.push_back(view(grad_beta_));
  }
  void zero_grad() override {
    std::fill(grad_gamma_.begin(), grad_gamma_.end(), 0.0);
    std::fill(grad_beta_.begin(), grad_beta_.end(), 0.0);
  }
  /// gamma, beta plus the two running-statistic vectors, as reported in
  /// parameter tables.
  long param_count() const override { return 4L * in_shape_.c; }
  std::string describe() const override { return "BatchNorm"; }
  void save_params(std::ostream& os) const override {
    for (const auto* v : {&gamma_, &beta_, &running_mean_, &running_var_})
      for (double x : *v) bytes::write_le<double>(os, x);
  }
  void load_params(std::istream& is) override {
    for (auto* v : {&gamma_, &beta_, &running_mean_, &running_var_})
      for (auto& x : *v) x = bytes::read_le<double>(is, "batch-norm tensor");
  }

private:
  std::vector<double> gamma_, beta_, running_mean_, running_var_;
  std::vector<double> grad_gamma_, grad_beta_;
  std::vector<double> x_hat_, inv_std_;
  std::size_t count_ = 0;
};

class Dense final : public Layer {
public:
  using Layer::Layer;

  Shape3 plan(Shape3 in) override {
    if (in.h != 1 || in.w != 1)
      throw ShapeError("dense: input must be flattened, got " + shape_str(in));
    if (spec_.units < 1) throw ShapeError("dense: units must be positive");
    in_shape_ = in;
    out_shape_ = {1, 1, spec_.units};
    weights_.assign(static_cast<std::size_t>(in.c) * spec_.units, 0.0);
    bias_.assign(static_cast<std::size_t>(spec_.units), 0.0);
    grad_w_.assign(weights_.size(), 0.0);
    grad_b_.assign(bias_.size(), 0.0);
    return out_shape_;
  }

  void init(SplitMix64& rng) override {
    const double std_dev = std::sqrt(2.0 / static_cast<double>(in_shape_.c));
    for (auto& w : weights_) w = std_dev * rng.next_gaussian();
    for (auto& b : bias_) b = initial_bias(spec_.act);
  }

  Tensor4 infer(const Tensor4& x) const override { return compute(x, nullptr); }
  Tensor4 forward(const Tensor4& x, bool train) override {
    if (!train) return compute(x, nullptr);
    in_cache_ = x;
    return compute(x, &act_cache_);
  }

  Tensor4 backward(const Tensor4& dy) override {
    std::vector<double> dz = dy.v;
    activation_grad_inplace(spec_.act, spec_.slope, act_cache_, dz);
    CMapRM dZ(dz.data(), dy.n, spec_.units);
    CMapRM X(in_cache_.v.data(), dy.n, in_shape_.c);
    CMapRM W(weights_.data(), in_shape_.c, spec_.units);
    MapRM dW(grad_w_.data(), W.rows(), W.cols());
    dW.noalias() += X.transpose() * dZ;
    for (int u = 0; u < spec_.units; ++u) grad_b_[static_cast<std::size_t>(u)] += dZ.col(u).sum();
    Tensor4 dx(dy.n, 1, 1, in_shape_.c);
    MapRM dX(dx.v.data(), dy.n, in_shape_.c);
    dX.noalias() = dZ * W.transpose();
    return dx;
  }

  void collect_params(std::vector<ParamView>& out) override {
    out.push_back(view(weights_));
    out.push_back(view(bias_));
  }
  void collect_grads(std::vector<ParamView>& out) override {
    out.push_back(view(grad_w_));
    out.push_back(view(grad_b_));
  }
  void zero_grad() override {
    std::fill(grad_w_.begin(), grad_w_.end(), 0.0);
    std::fill(grad_b_.begin(), grad_b_.end(), 0.0);
  }
  long param_count() const override {
    return static_cast<long>(weights_.size() + bias_.size());
  }
  std::string describe() const override {
    return "Dense(" + std::to_string(spec_.units) + ")";
  }
  void save_params(std::ostream& os) const override {
    for (double w : weights_) bytes::write_le<double>(os, w);
    for (double b : bias_) bytes::write_le<double>(os, b);
  }
  void load_params(std::istream& is) override {
    for (auto& w : weights_) w = bytes::read_le<double>(is, "dense weight");
    for (auto& b : bias_) b = bytes::read_le<double>(is, "dense bias");
  }

private:
  Tensor4 compute(const Tensor4& x, std::vector<double>* act_cache) const {
    Tensor4 y(x.n, 1, 1, spec_.units);
    CMapRM X(x.v.data(), x.n, in_shape_.c);
    CMapRM W(weights_.data(), in_shape_.c, spec_.units);
    MapRM Y(y.v.data(), x.n, spec_.units);
    Y.noalias() = X * W;
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias_.data(),
                                                        static_cast<Eigen::Index>(bias_.size()));
    apply_activation(spec_.act, spec_.slope, y.v, act_cache);
    return y;
  }

  std::vector<double> weights_, bias_, grad_w_, grad_b_;
  Tensor4 in_cache_;
  std::vector<double> act_cache_;
};

class Flatten final : public Layer {
public:
  using Layer::Layer;
  Shape3 plan(Shape3 in) override {
    in_shape_ = in;
    out_shape_ = {1, 1, in.h * in.w * in.c};
    return out_shape_;
  }
  Tensor4 infer(const Tensor4& x) const override {
    Tensor4 y = x;
    y.h = 1;
    y.w = 1;
    y.c = out_shape_.c;
    return y;
  }
  Tensor4 forward(const Tensor4& x, bool) override { return infer(x); }
  Tensor4 backward(const Tensor4& dy) override {
    Tensor4 dx = dy;
    dx.h = in_shape_.h;
    dx.w = in_shape_.w;
    dx.c = in_shape_.c;
    return dx;
  }
  std::string describe() const override { return "Flatten"; }
};

class Reshape final : public Layer {
public:
  using Layer::Layer;
  Shape3 plan(Shape3 in) override {
    const long want =
        static_cast<long>(spec_.reshape_h) * spec_.reshape_w * spec_.reshape_c;
    if (want != static_cast<long>(in.h) * in.w * in.c)
      throw ShapeError("reshape: element count mismatch from " + shape_str(in));
    in_shape_ = in;
    out_shape_ = {spec_.reshape_h, spec_.reshape_w, spec_.reshape_c};
    return out_shape_;
  }
  Tensor4 infer(const Tensor4& x) const override {
    Tensor4 y = x;
    y.h = out_shape_.h;
    y.w = out_shape_.w;
    y.c = out_shape_.c;
    return y;
  }
  Tensor4 forward(const Tensor4& x, bool) override { return infer(x); }
  Tensor4 backward(const Tensor4& dy) override {
    Tensor4 dx = dy;
    dx.h = in_shape_.h;
    dx.w = in_shape_.w;
    dx.c = in_shape_.c;
    return dx;
  }
  std::string describe() const override {
    std::ostringstream os;
    os << "Reshape" << shape_str(out_shape_);
    return os.str();
  }
};

class ActivationLayer final : public Layer {
public:
  using Layer::Layer;
  Shape3 plan(Shape3 in) override {
    in_shape_ = out_shape_ = in;
    return out_shape_;
  }
  Tensor4 infer(const Tensor4& x) const override {
    Tensor4 y = x;
    apply_activation(spec_.act, spec_.slope, y.v, nullptr);
    return y;
  }
  Tensor4 forward(const Tensor4& x, bool train) override {
    Tensor4 y = x;
    apply_activation(spec_.act, spec_.slope, y.v, train ? &cache_ : nullptr);
    return y;
  }
  Tensor4 backward(const Tensor4& dy) override {
    Tensor4 dx = dy;
    activation_grad_inplace(spec_.act, spec_.slope, cache_, dx.v);
    return dx;
  }
  std::string describe() const override {
    switch (spec_.act) {
      case Activation::leaky_relu: return "LeakyReLU";
      case Activation::sigmoid: return "Sigmoid";
      case Activation::linear: return "Linear";
    }
    return "Activation";
  }

private:
  std::vector<double> cache_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::conv2d: return std::make_unique<Conv2d>(spec);
    case LayerKind::conv2d_transpose: return std::make_unique<ConvTranspose2d>(spec);
    case LayerKind::batch_norm: return std::make_unique<BatchNorm>(spec);
    case LayerKind::dense: return std::make_unique<Dense>(spec);
    case LayerKind::flatten: return std::make_unique<Flatten>(spec);
    case LayerKind::reshape: return std::make_unique<Reshape>(spec);
    case LayerKind::activation: return std::make_unique<ActivationLayer>(spec);
  }
  throw InvalidArgument("unknown layer kind");
}

} // namespace

} // namespace detail

Tensor4 batch_from_images(const std::vector<ImageTensor>& images) {
  if (images.empty()) throw InvalidArgument("empty image batch");
  const int h = images.front().height, w = images.front().width, c = images.front().channels;
  Tensor4 t(static_cast<int>(images.size()), h, w, c);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.height != h || img.width != w || img.channels != c)
      throw ShapeError("images in a batch must share one shape");
    std::copy(img.pixels.begin(), img.pixels.end(), t.v.begin() + i * t.per_sample());
  }
  return t;
}

LayerSpec LayerSpec::conv(int filters, Activation act, int kernel, int stride) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.filters = filters;
  s.act = act;
  s.kernel_h = s.kernel_w = kernel;
  s.stride = stride;
  return s;
}
LayerSpec LayerSpec::conv_transpose(int filters, Activation act, int kernel, int stride) {
  LayerSpec s = conv(filters, act, kernel, stride);
  s.kind = LayerKind::conv2d_transpose;
  return s;
}
LayerSpec LayerSpec::batch_norm() {
  LayerSpec s;
  s.kind = LayerKind::batch_norm;
  return s;
}
LayerSpec LayerSpec::dense(int units, Activation act) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.units = units;
  s.act = act;
  return s;
}
LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}
LayerSpec LayerSpec::reshape(int h, int w, int c) {
  LayerSpec s;
  s.kind = LayerKind::reshape;
  s.reshape_h = h;
  s.reshape_w = w;
  s.reshape_c = c;
  return s;
}
LayerSpec LayerSpec::activation(Activation act, double slope) {
  LayerSpec s;
  s.kind = LayerKind::activation;
  s.act = act;
  s.slope = slope;
  return s;
}

CaeSpec paper_shape_preset() {
  using LS = LayerSpec;
  CaeSpec spec;
  spec.input = {256, 256, 3};
  for (int f : {16, 32, 64, 128, 256}) {
    spec.encoder.push_back(LS::conv(f));
    spec.encoder.push_back(LS::batch_norm());
  }
  spec.code = {LS::flatten(), LS::dense(50, Activation::leaky_relu), LS::dense(3)};
  spec.decoder.push_back(LS::dense(16384, Activation::leaky_relu));
  spec.decoder.push_back(LS::reshape(8, 8, 256));
  for (int f : {128, 64, 32, 16}) {
    spec.decoder.push_back(LS::conv_transpose(f));
    spec.decoder.push_back(LS::batch_norm());
  }
  spec.decoder.push_back(LS::conv_transpose(3, Activation::sigmoid));
  return spec;
}

CaeSpec desk_preset(Shape3 input) {
  if (input.h < 8 || input.w < 8 || input.h % 8 || input.w % 8)
    throw ShapeError("desk preset needs spatial dims divisible by 8");
  using LS = LayerSpec;
  CaeSpec spec;
  spec.input = input;
  for (int f : {8, 16, 32}) {
    spec.encoder.push_back(LS::conv(f));
    spec.encoder.push_back(LS::batch_norm());
  }
  spec.code = {LS::flatten(), LS::dense(50, Activation::leaky_relu), LS::dense(3)};
  const int bh = input.h / 8, bw = input.w / 8;
  spec.decoder.push_back(LS::dense(bh * bw * 32, Activation::leaky_relu));
  spec.decoder.push_back(LS::reshape(bh, bw, 32));
  for (int f : {16, 8}) {
    spec.decoder.push_back(LS::conv_transpose(f));
    spec.decoder.push_back(LS::batch_norm());
  }
  spec.decoder.push_back(LS::conv_transpose(input.c, Activation::sigmoid));
  return spec;
}

CaeModel::CaeModel() = default;
CaeModel::CaeModel(CaeModel&&) noexcept = default;
CaeModel& CaeModel::operator=(CaeModel&&) noexcept = default;
CaeModel::~CaeModel() = default;

CaeModel build_cae(const CaeSpec& spec, std::uint64_t seed) {
  if (spec.input.h < 1 || spec.input.w < 1 || spec.input.c < 1)
    throw ShapeError("input shape must be positive");
  CaeModel model;
  model.spec = spec;
  SplitMix64 rng(derive_seed(seed, 0xcaeULL));

  Shape3 shape = spec.input;
  auto build_section = [&](const std::vector<LayerSpec>& specs,
                           std::vector<std::unique_ptr<detail::Layer>>& out,
                           const char* section) {
    for (std::size_t i = 0; i < specs.size(); ++i) {
      auto layer = detail::make_layer(specs[i]);
      try {
        shape = layer->plan(shape);
      } catch (const ShapeError& e) {
        throw ShapeError(std::string(section) + " layer " + std::to_string(i + 1) + " (" +
                         layer->describe() + "): " + e.what());
      }
      layer->init(rng);
      out.push_back(std::move(layer));
    }
  };
  build_section(spec.encoder, model.encoder, "encoder");
  build_section(spec.code, model.code, "code");
  if (shape.h != 1 || shape.w != 1)
    throw ShapeError("code section must end in a flat latent layer");
  model.code_dim = shape.c;
  build_section(spec.decoder, model.decoder, "decoder");
  if (!(shape == spec.input))
    throw ShapeError("decoder output shape does not match the input shape");
  return model;
}

ParamCounts count_params(const CaeModel& model) {
  ParamCounts counts;
  for (const auto& l : model.encoder) {
    counts.encoder_total += l->param_count();
    counts.rows.emplace_back(l->describe(), l->param_count());
  }
  for (const auto& l : model.code) {
    counts.encoder_total += l->param_count();
    counts.rows.emplace_back(l->describe(), l->param_count());
  }
  for (const auto& l : model.decoder) {
    counts.decoder_total += l->param_count();
    counts.rows.emplace_back(l->describe(), l->param_count());
  }
  counts.grand_total = counts.encoder_total + counts.decoder_total;
  return counts;
}

namespace {

void check_input(const CaeModel& model, const Tensor4& batch) {
  if (batch.n < 1) throw ShapeError("empty batch");
  if (batch.h != model.spec.input.h || batch.w != model.spec.input.w ||
      batch.c != model.spec.input.c)
    throw ShapeError("batch shape does not match the model input shape");
}

Eigen::MatrixXd codes_to_matrix(const Tensor4& codes, int code_dim) {
  Eigen::MatrixXd m(codes.n, code_dim);
  for (int i = 0; i < codes.n; ++i)
    for (int j = 0; j < code_dim; ++j)
      m(i, j) = codes.v[static_cast<std::size_t>(i) * code_dim + j];
  return m;
}

} // namespace

ForwardResult forward(CaeModel& model, const Tensor4& batch, RunMode mode) {
  check_input(model, batch);
  const bool train = mode == RunMode::train;
  Tensor4 x = batch;
  for (auto& l : model.encoder) x = l->forward(x, train);
  for (auto& l : model.code) x = l->forward(x, train);
  ForwardResult result;
  result.codes = codes_to_matrix(x, model.code_dim);
  for (auto& l : model.decoder) x = l->forward(x, train);
  result.reconstruction = std::move(x);
  return result;
}

ForwardResult forward_infer(const CaeModel& model, const Tensor4& batch) {
  check_input(model, batch);
  Tensor4 x = batch;
  for (const auto& l : model.encoder) x = l->infer(x);
  for (const auto& l : model.code) x = l->infer(x);
  ForwardResult result;
  result.codes = codes_to_matrix(x, model.code_dim);
  for (const auto& l : model.decoder) x = l->infer(x);
  result.reconstruction = std::move(x);
  return result;
}

double mse_loss(const Tensor4& recon, const Tensor4& target) {
  if (recon.v.size() != target.v.size()) throw ShapeError("mse_loss: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < recon.v.size(); ++i) {
    const double d = recon.v[i] - target.v[i];
    s += d * d;
  }
  return s / static_cast<double>(recon.v.size());
}

double mae(const Tensor4& recon, const Tensor4& target) {
  if (recon.v.size() != target.v.size()) throw ShapeError("mae: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < recon.v.size(); ++i) s += std::abs(recon.v[i] - target.v[i]);
  return s / static_cast<double>(recon.v.size());
}

double r2(const Tensor4& recon, const Tensor4& target) {
  if (recon.v.size() != target.v.size()) throw ShapeError("r2: shape mismatch");
  const double mean =
      std::accumulate(target.v.begin(), target.v.end(), 0.0) /
      static_cast<double>(target.v.size());
  double sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < target.v.size(); ++i) {
    const double e = recon.v[i] - target.v[i];
    const double t = target.v[i] - mean;
    sse += e * e;
    sst += t * t;
  }
  if (sst <= 0.0) return sse <= 0.0 ? 1.0 : 0.0;
  return 1.0 - sse / sst;
}

std::vector<ParamView> trainable_params(CaeModel& model) {
  std::vector<ParamView> out;
  for (auto* section : {&model.encoder, &model.code, &model.decoder})
    for (auto& l : *section) l->collect_params(out);
  return out;
}

std::vector<ParamView> param_grads(CaeModel& model) {
  std::vector<ParamView> out;
  for (auto* section : {&model.encoder, &model.code, &model.decoder})
    for (auto& l : *section) l->collect_grads(out);
  return out;
}

void zero_grads(CaeModel& model) {
  for (auto* section : {&model.encoder, &model.code, &model.decoder})
    for (auto& l : *section) l->zero_grad();
}

OptimizerState make_adam(const CaeModel& model, AdamParams hyper) {
  OptimizerState state;
  state.hyper = hyper;
  auto params = trainable_params(const_cast<CaeModel&>(model));
  for (const auto& p : params) {
    state.m.emplace_back(p.size, 0.0);
    state.v.emplace_back(p.size, 0.0);
  }
  return state;
}

namespace {

void backprop_mse(CaeModel& model, const Tensor4& reconstruction, const Tensor4& batch) {
  Tensor4 grad = reconstruction;
  const double scale = 2.0 / static_cast<double>(grad.v.size());
  for (std::size_t i = 0; i < grad.v.size(); ++i)
    grad.v[i] = scale * (reconstruction.v[i] - batch.v[i]);
  for (auto it = model.decoder.rbegin(); it != model.decoder.rend(); ++it)
    grad = (*it)->backward(grad);
  for (auto it = model.code.rbegin(); it != model.code.rend(); ++it)
    grad = (*it)->backward(grad);
  for (auto it = model.encoder.rbegin(); it != model.encoder.rend(); ++it)
    grad = (*it)->backward(grad);
}

} // namespace

void adam_step(CaeModel& model, OptimizerState& opt) {
  auto params = trainable_params(model);
  auto grads = param_grads(model);
  if (params.size() != opt.m.size())
    throw InvalidArgument("optimizer state does not match this model");
  opt.step += 1;
  const auto& h = opt.hyper;
  const double bc1 = 1.0 - std::pow(h.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(h.beta2, static_cast<double>(opt.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    double* p = params[t].data;
    const double* g = grads[t].data;
    auto& m = opt.m[t];
    auto& v = opt.v[t];
    for (std::size_t i = 0; i < params[t].size; ++i) {
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g[i];
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g[i] * g[i];
      p[i] -= h.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + h.eps);
    }
  }
}

double backward_only(CaeModel& model, const Tensor4& batch) {
  ForwardResult result = forward(model, batch, RunMode::train);
  const double loss = mse_loss(result.reconstruction, batch);
  backprop_mse(model, result.reconstruction, batch);
  return loss;
}

double backward_and_step(CaeModel& model, const Tensor4& batch, OptimizerState& opt) {
  zero_grads(model);
  const double loss = backward_only(model, batch);
  if (!std::isfinite(loss))
    throw Error("cae: non-finite training loss, aborting the epoch");
  adam_step(model, opt);
  return loss;
}

TrainHistory train(CaeModel& model, const Tensor4& images, int epochs, double lr, int batch_size,
                   std::uint64_t seed) {
  if (images.n < 1) throw InvalidArgument("train: empty training set");
  if (batch_size < 1) throw InvalidArgument("train: batch_size must be positive");
  if (epochs < 0) throw InvalidArgument("train: epochs must be non-negative");

  TrainHistory history;
  if (epochs == 0) return history;

  model.training = true;
  OptimizerState opt = make_adam(model, AdamParams{lr, 0.9, 0.999, 1e-8});
  SplitMix64 rng(derive_seed(seed, 0x7a11ULL));
  std::vector<int> order(static_cast<std::size_t>(images.n));
  std::iota(order.begin(), order.end(), 0);

  const std::size_t sample = images.per_sample();
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Fisher-Yates with the seeded generator
    for (int i = images.n - 1; i > 0; --i) {
      const auto j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double sse = 0.0, sae = 0.0, sst = 0.0;
    std::size_t count = 0;
    for (int start = 0; start < images.n; start += batch_size) {
      const int bn = std::min(batch_size, images.n - start);
      Tensor4 batch(bn, images.h, images.w, images.c);
      for (int b = 0; b < bn; ++b)
        std::copy_n(images.v.begin() +
                        static_cast<std::size_t>(order[static_cast<std::size_t>(start + b)]) *
                            sample,
                    sample, batch.v.begin() + static_cast<std::size_t>(b) * sample);
      zero_grads(model);
      ForwardResult res = forward(model, batch, RunMode::train);
      const double loss = mse_loss(res.reconstruction, batch);
      if (!std::isfinite(loss))
        throw Error("cae: non-finite training loss at epoch " + std::to_string(epoch + 1));
      backprop_mse(model, res.reconstruction, batch);
      adam_step(model, opt);

      sse += loss * static_cast<double>(batch.v.size());
      sae += mae(res.reconstruction, batch) * static_cast<double>(batch.v.size());
      const double mean = std::accumulate(batch.v.begin(), batch.v.end(), 0.0) /
                          static_cast<double>(batch.v.size());
      for (double t : batch.v) sst += (t - mean) * (t - mean);
      count += batch.v.size();
    }
    const auto t1 = std::chrono::steady_clock::now();
    history.mse.push_back(sse / static_cast<double>(count));
    history.mae.push_back(sae / static_cast<double>(count));
    history.r2.push_back(sst > 0 ? 1.0 - sse / sst : 1.0);
    history.wall_ms.push_back(
        std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  model.training = false;
  return history;
}

Eigen::MatrixXd latent_codes(const CaeModel& model, const Tensor4& images) {
  if (model.training) throw InvalidArgument("latent_codes requires infer mode");
  return forward_infer(model, images).codes;
}

namespace {

constexpr char kMagic[4] = {'W', 'C', 'A', 'E'};
constexpr std::uint16_t kVersion = 1;

void write_spec(std::ostream& os, const LayerSpec& s) {
  bytes::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.kind));
  bytes::write_le<std::int32_t>(os, s.kernel_h);
  bytes::write_le<std::int32_t>(os, s.kernel_w);
  bytes::write_le<std::int32_t>(os, s.stride);
  bytes::write_le<std::int32_t>(os, s.filters);
  bytes::write_le<std::int32_t>(os, s.units);
  bytes::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(s.act));
  bytes::write_le<double>(os, s.slope);
  bytes::write_le<std::int32_t>(os, s.reshape_h);
  bytes::write_le<std::int32_t>(os, s.reshape_w);
  bytes::write_le<std::int32_t>(os, s.reshape_c);
}

LayerSpec read_spec(std::istream& is) {
  LayerSpec s;
  const auto kind = bytes::read_le<std::uint8_t>(is, "layer kind");
  if (kind > static_cast<std::uint8_t>(LayerKind::activation))
    throw FormatError(FormatFault::bad_value, "unknown layer kind in checkpoint");
  s.kind = static_cast<LayerKind>(kind);
  s.kernel_h = bytes::read_le<std::int32_t>(is, "kernel_h");
  s.kernel_w = bytes::read_le<std::int32_t>(is, "kernel_w");
  s.stride = bytes::read_le<std::int32_t>(is, "stride");
  s.filters = bytes::read_le<std::int32_t>(is, "filters");
  s.units = bytes::read_le<std::int32_t>(is, "units");
  const auto act = bytes::read_le<std::uint8_t>(is, "activation");
  if (act > static_cast<std::uint8_t>(Activation::sigmoid))
    throw FormatError(FormatFault::bad_value, "unknown activation in checkpoint");
  s.act = static_cast<Activation>(act);
  s.slope = bytes::read_le<double>(is, "slope");
  s.reshape_h = bytes::read_le<std::int32_t>(is, "reshape_h");
  s.reshape_w = bytes::read_le<std::int32_t>(is, "reshape_w");
  s.reshape_c = bytes::read_le<std::int32_t>(is, "reshape_c");
  return s;
}

} // namespace

void save_cae(const CaeModel& model, const std::filesystem::path& file,
              const OptimizerState* opt) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  bytes::write_magic(os, kMagic);
  bytes::write_le<std::uint16_t>(os, kVersion);
  bytes::write_le<std::int32_t>(os, model.spec.input.h);
  bytes::write_le<std::int32_t>(os, model.spec.input.w);
  bytes::write_le<std::int32_t>(os, model.spec.input.c);
  for (const auto* section : {&model.spec.encoder, &model.spec.code, &model.spec.decoder}) {
    bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(section->size()));
    for (const auto& s : *section) write_spec(os, s);
  }
  for (const auto* section : {&model.encoder, &model.code, &model.decoder})
    for (const auto& l : *section) l->save_params(os);
  bytes::write_le<std::uint8_t>(os, opt ? 1 : 0);
  if (opt) {
    bytes::write_le<double>(os, opt->hyper.lr);
    bytes::write_le<double>(os, opt->hyper.beta1);
    bytes::write_le<double>(os, opt->hyper.beta2);
    bytes::write_le<double>(os, opt->hyper.eps);
    bytes::write_le<std::int64_t>(os, opt->step);
    for (const auto* bank : {&opt->m, &opt->v})
      for (const auto& tensor : *bank)
        for (double x : tensor) bytes::write_le<double>(os, x);
  }
  if (!os) throw Error("write failed on " + file.string());
}

CaeModel load_cae(const std::filesystem::path& file, OptimizerState* opt) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file.string());
  bytes::expect_magic(is, kMagic, "WCAE");
  if (bytes::read_le<std::uint16_t>(is, "version") != kVersion)
    throw FormatError(FormatFault::unknown_version, file.string() + ": unsupported version");
  CaeSpec spec;
  spec.input.h = bytes::read_le<std::int32_t>(is, "input h");
  spec.input.w = bytes::read_le<std::int32_t>(is, "input w");
  spec.input.c = bytes::read_le<std::int32_t>(is, "input c");
  for (auto* section : {&spec.encoder, &spec.code, &spec.decoder}) {
    const auto count = bytes::read_le<std::uint32_t>(is, "layer count");
    for (auto i = 0u; i < count; ++i) section->push_back(read_spec(is));
  }
  CaeModel model = build_cae(spec, 0);
  for (auto* section : {&model.encoder, &model.code, &model.decoder})
    for (auto& l : *section) l->load_params(is);
  const auto has_opt = bytes::read_le<std::uint8_t>(is, "optimizer flag");
  if (has_opt && opt) {
    opt->hyper.lr = bytes::read_le<double>(is, "lr");
    opt->hyper.beta1 = bytes::read_le<double>(is, "beta1");
    opt->hyper.beta2 = bytes::read_le<double>(is, "beta2");
    opt->hyper.eps = bytes::read_le<double>(is, "eps");
    opt->step = bytes::read_le<std::int64_t>(is, "step");
    *opt = [&] {
      OptimizerState st;
      st.hyper = opt->hyper;
      st.step = opt->step;
      auto params = trainable_params(model);
      for (const auto& p : params) {
        st.m.emplace_back(p.size, 0.0);
        st.v.emplace_back(p.size, 0.0);
      }
      for (auto* bank : {&st.m, &st.v})
        for (auto& tensor : *bank)
          for (auto& x : tensor) x = bytes::read_le<double>(is, "moment");
      return st;
    }();
  }
  return model;
}

} // namespace wavescope
