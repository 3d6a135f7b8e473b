#include "wavescope/subspace.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "wavescope/bytes.hpp"
#include "wavescope/errors.hpp"
#include "wavescope/rng.hpp"

namespace wavescope {

namespace {

constexpr char kMagic[4] = {'W', 'S', 'U', 'B'};
constexpr std::uint16_t kVersion = 1;

/// Flip rows so the largest-|entry| of each is positive. Makes fits
/// deterministic up to the solver itself.
void fix_signs(Eigen::MatrixXd& rows) {
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    Eigen::Index j;
    rows.row(i).cwiseAbs().maxCoeff(&j);
    if (rows(i, j) < 0) rows.row(i) = -rows.row(i);
  }
}

void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) bytes::write_le<double>(os, m(i, j));
}

Eigen::MatrixXd read_matrix(std::istream& is, Eigen::Index rows, Eigen::Index cols,
                            const char* what) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = bytes::read_le<double>(is, what);
  return m;
}

/// Eigen-decomposition whitener over the top-m eigenpairs (descending):
/// returns (K = D^{-1/2} E^T restricted to m rows, K_pinv = E D^{1/2}).
/// For wide data (d > n) the same eigenpairs come from the n x n Gram matrix:
/// cov = X^T X/(n-1) shares its nonzero spectrum with X X^T/(n-1), and the
/// covariance eigenvector is X^T u / (sigma * sqrt(n-1)).
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> component_whitener(const Eigen::MatrixXd& centered,
                                                               int m) {
  const Eigen::Index n = centered.rows();
  const Eigen::Index d = centered.cols();
  const double total = centered.squaredNorm() / static_cast<double>(n - 1);
  if (!(total > 0)) throw InvalidArgument("zero-variance data cannot be whitened");
  const double ridge = 1e-12 * total;

  Eigen::MatrixXd K(m, d), Kp(d, m);
  if (d <= n) {
    Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    cov.diagonal().array() += ridge;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw Error("eigen-decomposition failed");
    for (int i = 0; i < m; ++i) {
      const Eigen::Index src = d - 1 - i; // ascending order from the solver
      const double lambda = std::max(es.eigenvalues()(src), ridge);
      K.row(i) = es.eigenvectors().col(src).transpose() / std::sqrt(lambda);
      Kp.col(i) = es.eigenvectors().col(src) * std::sqrt(lambda);
    }
  } else {
    Eigen::MatrixXd gram = centered * centered.transpose() / static_cast<double>(n - 1);
    gram.diagonal().array() += ridge;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    if (es.info() != Eigen::Success) throw Error("eigen-decomposition failed");
    for (int i = 0; i < m; ++i) {
      const Eigen::Index src = n - 1 - i;
      const double lambda = std::max(es.eigenvalues()(src), ridge);
      const Eigen::VectorXd v = centered.transpose() * es.eigenvectors().col(src) /
                                std::sqrt(lambda * static_cast<double>(n - 1));
      K.row(i) = v.transpose() / std::sqrt(lambda);
      Kp.col(i) = v * std::sqrt(lambda);
    }
  }
  return {K, Kp};
}

} // namespace

PcaModel pca_fit(const Eigen::MatrixXd& X, int n_components) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (n < 2) throw InvalidArgument("PCA needs at least two rows");
  if (n_components < 1 || n_components > std::min<Eigen::Index>(n - 1, d))
    throw InvalidArgument("n_components must be in [1, min(n-1, d)]");

  PcaModel model;
  model.mean = X.colwise().mean();
  Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
  model.total_variance = centered.squaredNorm() / static_cast<double>(n - 1);

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  model.components = svd.matrixV().leftCols(n_components).transpose();
  model.eigenvalues.resize(n_components);
  const double tiny = 1e-12 * (svd.singularValues().size() ? svd.singularValues()(0) : 0.0);
  for (int i = 0; i < n_components; ++i) {
    const double s = svd.singularValues()(i);
    model.eigenvalues(i) = s * s / static_cast<double>(n - 1);
    if (s <= tiny) {
      model.eigenvalues(i) = 0.0;
      model.rank_deficient = true;
    }
  }
  fix_signs(model.components);
  return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.mean.size())
    throw ShapeError("pca_transform: column count does not match the fitted dimension");
  return (X.rowwise() - model.mean.transpose()) * model.components.transpose();
}

Eigen::MatrixXd pca_inverse(const PcaModel& model, const Eigen::MatrixXd& Y) {
  if (Y.cols() != model.components.rows())
    throw ShapeError("pca_inverse: column count does not match the component count");
  return (Y * model.components).rowwise() + model.mean.transpose();
}

Eigen::VectorXd explained_variance_ratio(const PcaModel& model) {
  if (model.total_variance <= 0) throw InvalidArgument("model has zero total variance");
  return model.eigenvalues / model.total_variance;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> whiten(const Eigen::MatrixXd& X) {
  const Eigen::Index n = X.rows();
  if (n < 2) throw InvalidArgument("whitening needs at least two rows");
  const Eigen::VectorXd mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - mean.transpose();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  if (!(cov.trace() > 0)) throw InvalidArgument("zero-variance data cannot be whitened");
  cov.diagonal().array() += 1e-12 * cov.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) throw Error("eigen-decomposition failed");
  const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd W =
      es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();
  return {centered * W.transpose(), W};
}

IcaModel fastica_fit(const Eigen::MatrixXd& X, int n_components, double tol, int max_iter,
                     std::uint64_t seed) {
  const Eigen::Index n = X.rows(), d = X.cols();
  if (n < 2) throw InvalidArgument("FastICA needs at least two rows");
  if (n_components < 1 || n_components > std::min<Eigen::Index>(n - 1, d))
    throw InvalidArgument("n_components must be in [1, min(n-1, d)]");
  if (tol <= 0 || max_iter < 1) throw InvalidArgument("bad tolerance or iteration budget");

  IcaModel model;
  model.mean = X.colwise().mean();
  const Eigen::MatrixXd centered = X.rowwise() - model.mean.transpose();
  auto [K, Kp] = component_whitener(centered, n_components);
  const Eigen::MatrixXd Z = centered * K.transpose(); // n x m, unit covariance

  const int m = n_components;
  SplitMix64 rng(derive_seed(seed, 0x1caULL));
  Eigen::MatrixXd W(m, m);
  for (Eigen::Index i = 0; i < W.size(); ++i) W(i) = rng.next_gaussian();

  auto orthogonalize = [](Eigen::MatrixXd& M) {
    // symmetric decorrelation: M <- (M M^T)^{-1/2} M
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M * M.transpose());
    const Eigen::VectorXd inv_sqrt = es.eigenvalues().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    M = es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose() * M;
  };
  orthogonalize(W);

  model.converged = false;
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::MatrixXd U = Z * W.transpose();          // n x m projections
    const Eigen::MatrixXd G = U.array().tanh().matrix();  // g(u)
    const Eigen::VectorXd g_prime_mean =
        (1.0 - G.array().square()).colwise().mean().transpose();
    Eigen::MatrixXd W_next =
        (G.transpose() * Z) / static_cast<double>(n) - g_prime_mean.asDiagonal() * W;
    orthogonalize(W_next);
    double delta = 0.0;
    for (int i = 0; i < m; ++i)
      delta = std::max(delta, std::abs(1.0 - std::abs(W_next.row(i).dot(W.row(i)))));
    W = W_next;
    model.iterations = it + 1;
    if (delta < tol) {
      model.converged = true;
      break;
    }
  }

  model.whitening = K;
  model.unmixing = W;
  // fix signs on the composed unmixing, mirrored into the rotation
  Eigen::MatrixXd composed = W * K;
  for (Eigen::Index i = 0; i < composed.rows(); ++i) {
    Eigen::Index j;
    composed.row(i).cwiseAbs().maxCoeff(&j);
    if (composed(i, j) < 0) model.unmixing.row(i) = -model.unmixing.row(i);
  }
  model.mixing = Kp * model.unmixing.transpose();
  return model;
}

Eigen::MatrixXd ica_transform(const IcaModel& model, const Eigen::MatrixXd& X) {
  if (X.cols() != model.mean.size())
    throw ShapeError("ica_transform: column count does not match the fitted dimension");
  return (X.rowwise() - model.mean.transpose()) * model.whitening.transpose() *
         model.unmixing.transpose();
}

Eigen::MatrixXd ica_inverse(const IcaModel& model, const Eigen::MatrixXd& S) {
  if (S.cols() != model.unmixing.rows())
    throw ShapeError("ica_inverse: column count does not match the component count");
  return (S * model.mixing.transpose()).rowwise() + model.mean.transpose();
}

void save_pca(const PcaModel& model, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  bytes::write_magic(os, kMagic);
  bytes::write_le<std::uint16_t>(os, kVersion);
  bytes::write_le<std::uint8_t>(os, 0);
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.mean.size()));
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.components.rows()));
  bytes::write_le<std::uint8_t>(os, model.rank_deficient ? 1 : 0);
  bytes::write_le<double>(os, model.total_variance);
  write_matrix(os, model.mean.transpose());
  write_matrix(os, model.components);
  write_matrix(os, model.eigenvalues.transpose());
  if (!os) throw Error("write failed on " + file.string());
}

PcaModel load_pca(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file.string());
  bytes::expect_magic(is, kMagic, "WSUB");
  if (bytes::read_le<std::uint16_t>(is, "version") != kVersion)
    throw FormatError(FormatFault::unknown_version, file.string() + ": unsupported version");
  if (bytes::read_le<std::uint8_t>(is, "kind") != 0)
    throw FormatError(FormatFault::bad_value, file.string() + ": not a PCA model");
  const auto d = bytes::read_le<std::uint32_t>(is, "dims");
  const auto m = bytes::read_le<std::uint32_t>(is, "components");
  PcaModel model;
  model.rank_deficient = bytes::read_le<std::uint8_t>(is, "flag") != 0;
  model.total_variance = bytes::read_le<double>(is, "total_variance");
  model.mean = read_matrix(is, 1, d, "mean").transpose();
  model.components = read_matrix(is, m, d, "components");
  model.eigenvalues = read_matrix(is, 1, m, "eigenvalues").transpose();
  return model;
}

void save_ica(const IcaModel& model, const std::filesystem::path& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  bytes::write_magic(os, kMagic);
  bytes::write_le<std::uint16_t>(os, kVersion);
  bytes::write_le<std::uint8_t>(os, 1);
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.mean.size()));
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.unmixing.rows()));
  bytes::write_le<std::uint8_t>(os, model.converged ? 1 : 0);
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(model.iterations));
  write_matrix(os, model.mean.transpose());
  write_matrix(os, model.whitening);
  write_matrix(os, model.unmixing);
  write_matrix(os, model.mixing);
  if (!os) throw Error("write failed on " + file.string());
}

void save_features(const FeatureSet& features, const std::filesystem::path& file) {
  if (!features.labels.empty() &&
      features.labels.size() != static_cast<std::size_t>(features.X.rows()))
    throw InvalidArgument("feature labels must be empty or one per row");
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  bytes::write_magic(os, "WFEA");
  bytes::write_le<std::uint16_t>(os, kVersion);
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(features.X.rows()));
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(features.X.cols()));
  bytes::write_le<std::uint8_t>(os, features.labels.empty() ? 0 : 1);
  write_matrix(os, features.X);
  for (auto l : features.labels) bytes::write_le<std::uint8_t>(os, l);
  if (!os) throw Error("write failed on " + file.string());
}

FeatureSet load_features(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file.string());
  bytes::expect_magic(is, "WFEA", "WFEA");
  if (bytes::read_le<std::uint16_t>(is, "version") != kVersion)
    throw FormatError(FormatFault::unknown_version, file.string() + ": unsupported version");
  const auto n = bytes::read_le<std::uint32_t>(is, "rows");
  const auto m = bytes::read_le<std::uint32_t>(is, "cols");
  const auto has_labels = bytes::read_le<std::uint8_t>(is, "label flag");
  FeatureSet features;
  features.X = read_matrix(is, n, m, "features");
  if (has_labels) {
    features.labels.resize(n);
    for (auto& l : features.labels) {
      l = bytes::read_le<std::uint8_t>(is, "label");
      if (l > 1) throw FormatError(FormatFault::bad_label, file.string() + ": bad label");
    }
  }
  return features;
}

IcaModel load_ica(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file.string());
  bytes::expect_magic(is, kMagic, "WSUB");
  if (bytes::read_le<std::uint16_t>(is, "version") != kVersion)
    throw FormatError(FormatFault::unknown_version, file.string() + ": unsupported version");
  if (bytes::read_le<std::uint8_t>(is, "kind") != 1)
    throw FormatError(FormatFault::bad_value, file.string() + ": not an ICA model");
  const auto d = bytes::read_le<std::uint32_t>(is, "dims");
  const auto m = bytes::read_le<std::uint32_t>(is, "components");
  IcaModel model;
  model.converged = bytes::read_le<std::uint8_t>(is, "flag") != 0;
  model.iterations = static_cast<int>(bytes::read_le<std::uint32_t>(is, "iterations"));
  model.mean = read_matrix(is, 1, d, "mean").transpose();
  model.whitening = read_matrix(is, m, d, "whitening");
  model.unmixing = read_matrix(is, m, m, "unmixing");
  model.mixing = read_matrix(is, d, m, "mixing");
  return model;
}

} // namespace wavescope
