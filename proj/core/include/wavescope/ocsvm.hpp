#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "wavescope/errors.hpp"

namespace wavescope {

/// RBF kernel settings. gamma must be finite and positive.
struct KernelSpec {
  double gamma = 1.0;
};

/// exp(-gamma * ||x - y||^2), in (0, 1].
double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma);

/// Scale heuristic when the caller gives no gamma: 1 / (dim * mean feature
/// variance); falls back to 1 when the data has no variance.
double default_rbf_gamma(const Eigen::MatrixXd& X);

/// Fitted one-class SVM. Only rows with alpha > 0 are retained.
/// decision(x) = sum_i alpha_i k(sv_i, x) - rho; a non-negative score is
/// classified normal (the boundary itself counts as normal).
struct OcsvmModel {
  Eigen::MatrixXd support_vectors; // k x M
  Eigen::VectorXd alphas;          // k, each in (0, 1/(nu*n)], summing to 1
  double rho = 0.0;
  double nu = 0.5;
  double gamma = 1.0;
  long iterations = 0;
  double kkt_residual = 0.0;
};

/// Solves min 1/2 a^T K a s.t. 0 <= a_i <= 1/(nu*n), sum a = 1 by repeated
/// updates of the maximal-KKT-violation pair, stopping once the violation
/// drops below `kkt_tol` (default 1e-8, comfortably inside the 1e-6 KKT
/// contract) or after `max_iter` pair updates. rho is the mean
/// decision value over unbounded support vectors, falling back to the
/// midpoint of the support-vector decision range when none are unbounded.
OcsvmModel ocsvm_fit(const Eigen::MatrixXd& X, double nu, const KernelSpec& kernel,
                     double kkt_tol = 1e-8, long max_iter = 1000000);

double decision(const OcsvmModel& model, const Eigen::VectorXd& x);
Eigen::VectorXd decision_values(const OcsvmModel& model, const Eigen::MatrixXd& X);

/// 1 = anomaly (negative score), 0 = normal.
std::vector<std::uint8_t> predict(const OcsvmModel& model, const Eigen::MatrixXd& X);

/// WSUB container persistence, kind 2.
void save_ocsvm(const OcsvmModel& model, const std::filesystem::path& file);
OcsvmModel load_ocsvm(const std::filesystem::path& file);

} // namespace wavescope
