#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wavescope/tensor.hpp"

namespace wavescope {

enum class LayerKind : std::uint8_t {
  conv2d,
  conv2d_transpose,
  batch_norm,
  dense,
  flatten,
  reshape,
  activation,
};

enum class Activation : std::uint8_t { linear, leaky_relu, sigmoid };

/// Declarative layer description. Convolutions are kernel 3x3 by default with
/// symmetric padding (k-1)/2; stride 2 exactly halves even spatial dims, and
/// transposed stride-2 convolutions exactly double them.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int kernel_h = 3, kernel_w = 3, stride = 2;
  int filters = 0; // conv2d / conv2d_transpose output channels
  int units = 0;   // dense width
  Activation act = Activation::linear;
  double slope = 0.2; // leaky-relu slope
  int reshape_h = 0, reshape_w = 0, reshape_c = 0;

  static LayerSpec conv(int filters, Activation act = Activation::leaky_relu, int kernel = 3,
                        int stride = 2);
  static LayerSpec conv_transpose(int filters, Activation act = Activation::leaky_relu,
                                  int kernel = 3, int stride = 2);
  static LayerSpec batch_norm();
  static LayerSpec dense(int units, Activation act = Activation::linear);
  static LayerSpec flatten();
  static LayerSpec reshape(int h, int w, int c);
  static LayerSpec activation(Activation act, double slope = 0.2);
};

struct Shape3 {
  int h = 0, w = 0, c = 0;
  bool operator==(const Shape3&) const = default;
};

/// Architecture: encoder stack, code stack (ends at the latent layer) and
/// decoder stack. The chain must map input_shape back onto itself.
struct CaeSpec {
  std::vector<LayerSpec> encoder;
  std::vector<LayerSpec> code;
  std::vector<LayerSpec> decoder;
  Shape3 input;
};

/// Full-scale reference architecture: 256x256x3 input, five stride-2 conv+BN stages
/// (16..256 filters), Dense(50)/Dense(3) code, mirrored transposed-conv
/// decoder. Used for structural tests; training it is out of scope.
CaeSpec paper_shape_preset();

/// Desk-scale architecture: three conv+BN stages (8/16/32 filters),
/// Dense(50)/Dense(3) code, mirrored decoder. Spatial dims must be divisible
/// by 8; the default input is 64x64 grayscale.
CaeSpec desk_preset(Shape3 input = {64, 64, 1});

namespace detail {
class Layer;
}

enum class RunMode { train, infer };

class CaeModel {
public:
  CaeModel();
  CaeModel(CaeModel&&) noexcept;
  CaeModel& operator=(CaeModel&&) noexcept;
  ~CaeModel();

  CaeSpec spec;
  std::vector<std::unique_ptr<detail::Layer>> encoder;
  std::vector<std::unique_ptr<detail::Layer>> code;
  std::vector<std::unique_ptr<detail::Layer>> decoder;
  int code_dim = 0;
  bool training = false;
};

/// Builds and initializes the network (fan-in-scaled normal weights, zero
/// biases, identity batch norm), deterministically per seed. An inconsistent
/// shape chain raises ShapeError naming the first offending layer.
CaeModel build_cae(const CaeSpec& spec, std::uint64_t seed);

struct ParamCounts {
  long encoder_total = 0; // conv stack plus the code stack
  long decoder_total = 0;
  long grand_total = 0;
  std::vector<std::pair<std::string, long>> rows; // per layer, chain order
};

/// Counts trainable parameters plus batch-norm running statistics,
/// partitioned at the code/decoder boundary.
ParamCounts count_params(const CaeModel& model);

struct ForwardResult {
  Tensor4 reconstruction;
  Eigen::MatrixXd codes; // n x code_dim
};

/// Train mode normalizes with batch statistics and caches activations for a
/// following backward pass; infer mode uses running statistics, touches no
/// state, and is safe to call concurrently on a frozen model.
ForwardResult forward(CaeModel& model, const Tensor4& batch, RunMode mode);
ForwardResult forward_infer(const CaeModel& model, const Tensor4& batch);

double mse_loss(const Tensor4& recon, const Tensor4& target);
double mae(const Tensor4& recon, const Tensor4& target);
double r2(const Tensor4& recon, const Tensor4& target);

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct OptimizerState {
  AdamParams hyper;
  long step = 0;
  std::vector<std::vector<double>> m; // per trainable tensor
  std::vector<std::vector<double>> v;
};

OptimizerState make_adam(const CaeModel& model, AdamParams hyper = {});

struct ParamView {
  double* data = nullptr;
  std::size_t size = 0;
};

/// Trainable tensors (and their gradient buffers) in fixed chain order.
std::vector<ParamView> trainable_params(CaeModel& model);
std::vector<ParamView> param_grads(CaeModel& model);
void zero_grads(CaeModel& model);

/// Train-mode forward + exact MSE backprop, accumulating gradients; no
/// optimizer update. Returns the batch loss. Used directly by tests.
double backward_only(CaeModel& model, const Tensor4& batch);

/// Bias-corrected Adam update from the currently accumulated gradients.
void adam_step(CaeModel& model, OptimizerState& opt);

/// One optimization step: zero grads, forward(train), backward, Adam update.
/// Raises on a non-finite loss.
double backward_and_step(CaeModel& model, const Tensor4& batch, OptimizerState& opt);

struct TrainHistory {
  std::vector<double> mse;
  std::vector<double> mae;
  std::vector<double> r2; // pooled over mini-batches per epoch
  std::vector<double> wall_ms;
};

/// Seeded-shuffle mini-batch training on baseline images. Leaves the model in
/// infer mode.
TrainHistory train(CaeModel& model, const Tensor4& images, int epochs, double lr, int batch_size,
                   std::uint64_t seed);

/// Code-layer activations per image (infer mode required).
Eigen::MatrixXd latent_codes(const CaeModel& model, const Tensor4& images);

/// WCAE checkpoint: layer-spec table, f64 parameter tensors, running stats,
/// optional optimizer state.
void save_cae(const CaeModel& model, const std::filesystem::path& file,
              const OptimizerState* opt = nullptr);
CaeModel load_cae(const std::filesystem::path& file, OptimizerState* opt = nullptr);

} // namespace wavescope
