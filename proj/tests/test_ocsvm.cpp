#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numeric>

#include "oracles.hpp"
#include "wavescope/ocsvm.hpp"
#include "wavescope/rng.hpp"

using namespace wavescope;
namespace fs = std::filesystem;

namespace {

Eigen::MatrixXd gaussian_cloud(int n, int d, std::uint64_t seed, double spread = 1.0,
                               double offset = 0.0) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd X(n, d);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = offset + spread * rng.next_gaussian();
  return X;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& X, double gamma) {
  Eigen::MatrixXd K(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.rows(); ++j)
      K(i, j) = std::exp(-gamma * (X.row(i) - X.row(j)).squaredNorm());
  return K;
}

double model_objective(const OcsvmModel& model) {
  const Eigen::MatrixXd K = kernel_matrix(model.support_vectors, model.gamma);
  return 0.5 * model.alphas.dot(K * model.alphas);
}

} // namespace

TEST_CASE("rbf kernel: identity, closed form, symmetry") {
  Eigen::VectorXd x(3), y(3);
  x << 1.0, 2.0, 3.0;
  y = x;
  CHECK(rbf_kernel(x, y, 0.7) == 1.0);

  y << 1.0, 2.0, 4.0; // ||x-y||^2 = 1
  CHECK(rbf_kernel(x, y, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(std::exp(-1.0) == doctest::Approx(0.367879).epsilon(1e-5));

  SplitMix64 rng(1);
  for (int t = 0; t < 20; ++t) {
    Eigen::VectorXd a(4), b(4);
    for (int i = 0; i < 4; ++i) {
      a(i) = rng.next_gaussian();
      b(i) = rng.next_gaussian();
    }
    CHECK(std::abs(rbf_kernel(a, b, 0.5) - rbf_kernel(b, a, 0.5)) < 1e-15);
    CHECK(rbf_kernel(a, b, 0.5) > 0.0);
    CHECK(rbf_kernel(a, b, 0.5) <= 1.0);
  }
  CHECK_THROWS_AS(rbf_kernel(x, Eigen::VectorXd::Zero(2), 1.0), ShapeError);
  CHECK_THROWS_AS(rbf_kernel(x, y, 0.0), InvalidArgument);
}

TEST_CASE("ocsvm_fit: dual feasibility and the box/simplex constraints") {
  const Eigen::MatrixXd X = gaussian_cloud(50, 3, 5);
  for (double nu : {0.1, 0.5, 0.9}) {
    const OcsvmModel model = ocsvm_fit(X, nu, {0.5});
    const double C = 1.0 / (nu * 50.0);
    CHECK(model.alphas.sum() == doctest::Approx(1.0).epsilon(1e-8));
    for (Eigen::Index i = 0; i < model.alphas.size(); ++i) {
      CHECK(model.alphas(i) > 0.0);
      CHECK(model.alphas(i) <= C + 1e-8);
    }
    CHECK(model.kkt_residual < 1e-6);
  }
}

TEST_CASE("ocsvm_fit: objective matches the projected-gradient oracle on small instances") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const int n = 8 + static_cast<int>(seed * 2); // up to 18
    const Eigen::MatrixXd X = gaussian_cloud(n, 2, 100 + seed);
    const double nu = 0.3 + 0.1 * static_cast<double>(seed % 3);
    const double gamma = 0.8;
    const OcsvmModel model = ocsvm_fit(X, nu, {gamma});
    const Eigen::MatrixXd K = kernel_matrix(X, gamma);
    const Eigen::VectorXd oracle = oracles::ocsvm_dual_oracle(K, 1.0 / (nu * n));
    const double got = model_objective(model);
    const double want = oracles::ocsvm_objective(K, oracle);
    CHECK(std::abs(got - want) < 1e-6);
  }
}

TEST_CASE("ocsvm_fit: degenerate single point is normal") {
  Eigen::MatrixXd X(1, 2);
  X << 0.5, -0.25;
  const OcsvmModel model = ocsvm_fit(X, 0.5, {1.0});
  CHECK(model.alphas.size() == 1);
  CHECK(model.alphas(0) == 1.0);
  const auto labels = predict(model, X);
  CHECK(labels[0] == 0); // the boundary itself counts as normal
}

TEST_CASE("ocsvm nu-property on separable baseline points") {
  const int n = 200;
  const Eigen::MatrixXd X = gaussian_cloud(n, 2, 7);
  const KernelSpec kernel{default_rbf_gamma(X)};
  for (double nu : {0.1, 0.3, 0.5, 0.7, 0.9}) {
    const OcsvmModel model = ocsvm_fit(X, nu, kernel);
    const Eigen::VectorXd scores = decision_values(model, X);
    // boundary band at the solver tolerance: unbounded SVs score ~ +-1e-9
    const double outliers =
        static_cast<double>((scores.array() < -1e-7).count()) / static_cast<double>(n);
    const double svs = static_cast<double>(model.alphas.size()) / static_cast<double>(n);
    CHECK(outliers <= nu + 2.0 / n);
    CHECK(svs >= nu - 2.0 / n);
  }
}

TEST_CASE("decision: unbounded support vectors score ~0, distant points ~ -rho") {
  const Eigen::MatrixXd X = gaussian_cloud(60, 2, 9);
  const double nu = 0.4;
  const OcsvmModel model = ocsvm_fit(X, nu, {0.7});
  const double C = 1.0 / (nu * 60.0);
  int checked = 0;
  for (Eigen::Index k = 0; k < model.alphas.size(); ++k) {
    if (model.alphas(k) > 1e-7 && model.alphas(k) < C - 1e-7) {
      CHECK(std::abs(decision(model, model.support_vectors.row(k).transpose())) < 1e-5);
      ++checked;
    }
  }
  CHECK(checked > 0);

  Eigen::VectorXd far(2);
  far << 1e6, -1e6;
  CHECK(decision(model, far) == doctest::Approx(-model.rho).epsilon(1e-12));
  CHECK(model.rho > 0.0);
  CHECK(predict(model, far.transpose())[0] == 1);
}

TEST_CASE("decision scores are invariant to training-set row order") {
  const int n = 80;
  const Eigen::MatrixXd X = gaussian_cloud(n, 3, 11);
  Eigen::MatrixXd shuffled = X;
  SplitMix64 rng(13);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = n - 1; i > 0; --i)
    std::swap(perm[static_cast<std::size_t>(i)],
              perm[static_cast<std::size_t>(rng.next_below(static_cast<std::uint64_t>(i) + 1))]);
  for (int i = 0; i < n; ++i) shuffled.row(i) = X.row(perm[static_cast<std::size_t>(i)]);

  const KernelSpec kernel{default_rbf_gamma(X)};
  const OcsvmModel a = ocsvm_fit(X, 0.3, kernel);
  const OcsvmModel b = ocsvm_fit(shuffled, 0.3, kernel);
  const Eigen::MatrixXd probes = gaussian_cloud(30, 3, 17, 1.5);
  const Eigen::VectorXd sa = decision_values(a, probes);
  const Eigen::VectorXd sb = decision_values(b, probes);
  CHECK((sa - sb).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("predict: displaced cluster at 10 sigma is flagged anomalous") {
  const Eigen::MatrixXd train = gaussian_cloud(200, 2, 19);
  const Eigen::MatrixXd displaced = gaussian_cloud(100, 2, 23, 1.0, 10.0);
  const KernelSpec kernel{default_rbf_gamma(train)};
  const OcsvmModel model = ocsvm_fit(train, 0.1, kernel);
  const auto labels = predict(model, displaced);
  const long anomalies = std::count(labels.begin(), labels.end(), 1);
  CHECK(static_cast<double>(anomalies) >= 0.99 * 100);
}

TEST_CASE("predict: empty test set gives empty labels") {
  const Eigen::MatrixXd train = gaussian_cloud(20, 2, 29);
  const OcsvmModel model = ocsvm_fit(train, 0.5, {1.0});
  CHECK(predict(model, Eigen::MatrixXd(0, 2)).empty());
}

TEST_CASE("raising nu tightens the boundary monotonically") {
  const int n = 150;
  const Eigen::MatrixXd X = gaussian_cloud(n, 2, 31);
  const KernelSpec kernel{default_rbf_gamma(X)};
  long prev_inside = n + 1;
  for (double nu = 0.1; nu < 0.95; nu += 0.1) {
    const OcsvmModel model = ocsvm_fit(X, nu, kernel);
    const Eigen::VectorXd scores = decision_values(model, X);
    const long inside = (scores.array() >= 0.0).count();
    CHECK(inside <= prev_inside + 2); // tolerance of the monotonicity sweep
    prev_inside = inside;
  }
}

TEST_CASE("ocsvm persistence round trip") {
  const Eigen::MatrixXd X = gaussian_cloud(40, 3, 37);
  const OcsvmModel model = ocsvm_fit(X, 0.25, {0.9});
  const auto file = fs::temp_directory_path() / "wavescope_test_ocsvm.wsub";
  save_ocsvm(model, file);
  const OcsvmModel loaded = load_ocsvm(file);
  CHECK(loaded.rho == model.rho);
  CHECK(loaded.nu == model.nu);
  CHECK(loaded.gamma == model.gamma);
  CHECK((loaded.alphas - model.alphas).cwiseAbs().maxCoeff() == 0.0);
  CHECK((loaded.support_vectors - model.support_vectors).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd probes = gaussian_cloud(5, 3, 41);
  CHECK((decision_values(loaded, probes) - decision_values(model, probes)).cwiseAbs().maxCoeff() ==
        0.0);
  fs::remove(file);
}

TEST_CASE("ocsvm_fit parameter validation") {
  const Eigen::MatrixXd X = gaussian_cloud(10, 2, 43);
  CHECK_THROWS_AS(ocsvm_fit(X, 0.0, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(ocsvm_fit(X, 1.5, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(ocsvm_fit(X, 0.5, {0.0}), InvalidArgument);
  CHECK_THROWS_AS(ocsvm_fit(Eigen::MatrixXd(0, 2), 0.5, {1.0}), InvalidArgument);
  CHECK_THROWS_AS(decision(ocsvm_fit(X, 0.5, {1.0}), Eigen::VectorXd::Zero(5)), ShapeError);
}

TEST_CASE("default_rbf_gamma scale heuristic") {
  SplitMix64 rng(47);
  Eigen::MatrixXd X(500, 4);
  for (Eigen::Index i = 0; i < X.size(); ++i) X(i) = 3.0 * rng.next_gaussian(); // var 9
  // 1 / (d * mean feature variance) = 1 / (4 * 9)
  CHECK(default_rbf_gamma(X) == doctest::Approx(1.0 / 36.0).epsilon(0.15));
  CHECK(default_rbf_gamma(Eigen::MatrixXd::Ones(10, 3)) == 1.0);
}
