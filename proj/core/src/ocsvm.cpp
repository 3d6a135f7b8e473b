#include "wavescope/ocsvm.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "wavescope/bytes.hpp"
#include "wavescope/errors.hpp"

namespace wavescope {

namespace {

constexpr char kMagic[4] = {'W', 'S', 'U', 'B'};
constexpr std::uint16_t kVersion = 1;

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, double gamma) {
  const Eigen::VectorXd sq = X.rowwise().squaredNorm();
  Eigen::MatrixXd K = -2.0 * (X * X.transpose());
  K.colwise() += sq;
  K.rowwise() += sq.transpose();
  return (-gamma * K.cwiseMax(0.0)).array().exp();
}

} // namespace

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma) {
  if (x.size() != y.size()) throw ShapeError("rbf_kernel: dimension mismatch");
  if (!(gamma > 0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
  return std::exp(-gamma * (x - y).squaredNorm());
}

double default_rbf_gamma(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (n < 2 || d < 1) return 1.0;
  const Eigen::RowVectorXd mean = X.colwise().mean();
  const double var = (X.rowwise() - mean).squaredNorm() / static_cast<double>((n - 1) * d);
  if (!(var > 0)) return 1.0;
  return 1.0 / (static_cast<double>(d) * var);
}

OcsvmModel ocsvm_fit(const Eigen::MatrixXd& X, double nu, const KernelSpec& kernel,
                     double kkt_tol, long max_iter) {
  const Eigen::Index n = X.rows();
  if (n < 1) throw InvalidArgument("ocsvm_fit: empty training set");
  if (!(nu > 0) || nu > 1) throw InvalidArgument("nu must be in (0, 1]");
  if (!(kernel.gamma > 0) || !std::isfinite(kernel.gamma))
    throw InvalidArgument("gamma must be positive");

  OcsvmModel model;
  model.nu = nu;
  model.gamma = kernel.gamma;

  if (n == 1) {
    // degenerate but permitted: the single point carries all the mass
    model.support_vectors = X;
    model.alphas = Eigen::VectorXd::Ones(1);
    model.rho = 1.0; // k(x, x) = 1
    return model;
  }

  const double C = 1.0 / (nu * static_cast<double>(n));
  const Eigen::MatrixXd K = kernel_matrix(X, kernel.gamma);

  // feasible start: fill floor(nu*n) coordinates at the box bound
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  {
    const long full = static_cast<long>(std::floor(nu * static_cast<double>(n)));
    double remaining = 1.0;
    for (long i = 0; i < full && i < n; ++i) {
      alpha(i) = C;
      remaining -= C;
    }
    if (remaining > 0 && full < n) alpha(full) = remaining;
  }
  Eigen::VectorXd grad = K * alpha;

  const double eps = 1e-12;
  long it = 0;
  double violation = std::numeric_limits<double>::infinity();
  for (; it < max_iter; ++it) {
    // i: best decreasable coordinate (alpha > 0, largest gradient)
    // j: best increasable coordinate (alpha < C, smallest gradient)
    Eigen::Index i = -1, j = -1;
    double g_hi = -std::numeric_limits<double>::infinity();
    double g_lo = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < n; ++k) {
      if (alpha(k) > eps && grad(k) > g_hi) {
        g_hi = grad(k);
        i = k;
      }
      if (alpha(k) < C - eps && grad(k) < g_lo) {
        g_lo = grad(k);
        j = k;
      }
    }
    violation = g_hi - g_lo;
    if (i < 0 || j < 0 || violation < kkt_tol) break;

    const double eta = K(i, i) + K(j, j) - 2.0 * K(i, j);
    double step = eta > eps ? violation / eta : std::numeric_limits<double>::infinity();
    step = std::min({step, alpha(i), C - alpha(j)});
    alpha(i) -= step;
    alpha(j) += step;
    grad += step * (K.col(j) - K.col(i));
  }
  model.iterations = it;
  model.kkt_residual = std::max(violation, 0.0);

  // rho from unbounded support vectors; with none, the KKT conditions pin it
  // to [max g over bounded SVs, min g over zero-alpha points]
  double rho_sum = 0.0;
  long rho_count = 0;
  double bounded_max = -std::numeric_limits<double>::infinity();
  double free_min = std::numeric_limits<double>::infinity();
  for (Eigen::Index k = 0; k < n; ++k) {
    if (alpha(k) <= eps) {
      free_min = std::min(free_min, grad(k));
    } else if (alpha(k) >= C - eps) {
      bounded_max = std::max(bounded_max, grad(k));
    } else {
      rho_sum += grad(k);
      ++rho_count;
    }
  }
  if (rho_count > 0)
    model.rho = rho_sum / static_cast<double>(rho_count);
  else if (std::isfinite(bounded_max) && std::isfinite(free_min))
    model.rho = 0.5 * (bounded_max + free_min);
  else if (std::isfinite(bounded_max))
    model.rho = bounded_max; // nu = 1: every point at the bound
  else
    model.rho = free_min;

  const Eigen::Index sv_count = (alpha.array() > eps).count();
  model.support_vectors.resize(sv_count, X.cols());
  model.alphas.resize(sv_count);
  Eigen::Index out = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (alpha(k) <= eps) continue;
    model.support_vectors.row(out) = X.row(k);
    model.alphas(out) = alpha(k);
    ++out;
  }
  return model;
}

double decision(const OcsvmModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.support_vectors.cols())
    throw ShapeError("decision: dimension mismatch with the fitted model");
  double sum = 0.0;
  for (Eigen::Index k = 0; k < model.support_vectors.rows(); ++k)
    sum += model.alphas(k) *
           std::exp(-model.gamma * (model.support_vectors.row(k).transpose() - x).squaredNorm());
  return sum - model.rho;
}

Eigen::VectorXd decision_values(const OcsvmModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.support_vectors.cols())
    throw ShapeError("decision_values: dimension mismatch with the fitted model");
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index r = 0; r < X.rows(); ++r) out(r) = decision(model, X.row(r).transpose());
  return out;
}

std::vector<std::uint8_t> predict(const OcsvmModel& model, const Eigen::MatrixXd& X) {
  const Eigen::VectorXd scores = decision_values(model, X);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index r = 0; r < scores.size(); ++r)
    labels[static_cast<std::size_t>(r)] = scores(r) < 0.0 ? 1 : 0;
  return labels;
}

void save_ocsvm(const OcsvmModel& model, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  bytes::write_magic(os, kMagic);
  bytes::write_le<std::uint16_t>(os, kVersion);
  bytes::write_le<std::uint8_t>(os, 2);
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.support_vectors.cols()));
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.support_vectors.rows()));
  bytes::write_le<double>(os, model.nu);
  bytes::write_le<double>(os, model.gamma);
  bytes::write_le<double>(os, model.rho);
  for (Eigen::Index k = 0; k < model.alphas.size(); ++k)
    bytes::write_le<double>(os, model.alphas(k));
  for (Eigen::Index i = 0; i < model.support_vectors.rows(); ++i)
    for (Eigen::Index j = 0; j < model.support_vectors.cols(); ++j)
      bytes::write_le<double>(os, model.support_vectors(i, j));
  if (!os) throw Error("write failed on " + file.string());
}

OcsvmModel load_ocsvm(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file.string());
  bytes::expect_magic(is, kMagic, "WSUB");
  if (bytes::read_le<std::uint16_t>(is, "version") != kVersion)
    throw FormatError(FormatFault::unknown_version, file.string() + ": unsupported version");
  if (bytes::read_le<std::uint8_t>(is, "kind") != 2)
    throw FormatError(FormatFault::bad_value, file.string() + ": not an ocSVM model");
  const auto dim = bytes::read_le<std::uint32_t>(is, "dims");
  const auto count = bytes::read_le<std::uint32_t>(is, "sv count");
  OcsvmModel model;
  model.nu = bytes::read_le<double>(is, "nu");
  model.gamma = bytes::read_le<double>(is, "gamma");
  model.rho = bytes::read_le<double>(is, "rho");
  model.alphas.resize(count);
  for (auto k = 0u; k < count; ++k) model.alphas(k) = bytes::read_le<double>(is, "alpha");
  model.support_vectors.resize(count, dim);
  for (auto i = 0u; i < count; ++i)
    for (auto j = 0u; j < dim; ++j)
      model.support_vectors(i, j) = bytes::read_le<double>(is, "support vector");
  return model;
}

} // namespace wavescope
