#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>

#include <Eigen/Dense>

#include "wavescope/errors.hpp"

namespace wavescope {

/// PCA fitted by mean-centered SVD. Rows of `components` are orthonormal
/// principal directions, sign-fixed so each row's largest-magnitude entry is
/// positive. eigenvalues[i] = sigma_i^2/(n-1), descending.
struct PcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd components; // M x d
  Eigen::VectorXd eigenvalues;
  double total_variance = 0.0; // trace of the data covariance
  bool rank_deficient = false; // trailing eigenvalues were numerically zero
};

PcaModel pca_fit(const Eigen::MatrixXd& X, int n_components);
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& X);
Eigen::MatrixXd pca_inverse(const PcaModel& model, const Eigen::MatrixXd& Y);
Eigen::VectorXd explained_variance_ratio(const PcaModel& model);

/// Symmetric eigen-decomposition whitening: returns (whitened data, W) with
/// W = E D^{-1/2} E^T of the sample covariance and whitened = (X - mean) W^T.
/// A ridge of 1e-12 * trace guards near-singular covariances; an all-zero
/// covariance is rejected.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> whiten(const Eigen::MatrixXd& X);

/// FastICA result. Forward map: s = unmixing * whitening * (x - mean), with
/// `whitening` the m-component eigenvalue-decomposition whitener (m x d) and
/// `unmixing` an m x m orthogonal rotation. `mixing` (d x m) inverts the
/// composed map in the least-squares sense.
struct IcaModel {
  Eigen::VectorXd mean;
  Eigen::MatrixXd whitening;
  Eigen::MatrixXd unmixing;
  Eigen::MatrixXd mixing;
  bool converged = false;
  int iterations = 0;
};

/// Symmetric (parallel) fixed-point iteration with the log-cosh contrast.
/// Stops when the largest rotation-vector change drops below `tol`; returns
/// the best iterate with converged=false if `max_iter` is exhausted.
IcaModel fastica_fit(const Eigen::MatrixXd& X, int n_components, double tol = 1e-4,
                     int max_iter = 500, std::uint64_t seed = 0);

Eigen::MatrixXd ica_transform(const IcaModel& model, const Eigen::MatrixXd& X);
Eigen::MatrixXd ica_inverse(const IcaModel& model, const Eigen::MatrixXd& S);

/// WSUB container persistence (kind 0 = PCA, kind 1 = ICA).
void save_pca(const PcaModel& model, const std::filesystem::path& file);
PcaModel load_pca(const std::filesystem::path& file);
void save_ica(const IcaModel& model, const std::filesystem::path& file);
IcaModel load_ica(const std::filesystem::path& file);

/// Feature matrix with optional per-row labels (1 = damaged), persisted as a
/// WFEA file for the fit-ocsvm / sweep-nu CLI stages.
struct FeatureSet {
  Eigen::MatrixXd X;
  std::vector<std::uint8_t> labels; // empty or one per row
};

void save_features(const FeatureSet& features, const std::filesystem::path& file);
FeatureSet load_features(const std::filesystem::path& file);

} // namespace wavescope
