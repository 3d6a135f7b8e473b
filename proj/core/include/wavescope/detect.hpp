#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "wavescope/cae.hpp"
#include "wavescope/ocsvm.hpp"
#include "wavescope/subspace.hpp"

namespace wavescope {

enum class Method { pca_ocsvm, ica_ocsvm, cae };
const char* method_name(Method m);
Method method_from_name(const std::string& name);

/// Reconstruction-error threshold: the max rule reproduces the training
/// maximum exactly; the quantile rule is the linear-interpolation empirical
/// quantile between order statistics (q*(n-1) fractional position).
struct ThresholdRule {
  enum class Kind { max, quantile };
  Kind kind = Kind::quantile;
  double q = 0.99;
};

double compute_threshold(const std::vector<double>& train_errors, const ThresholdRule& rule);

/// error > threshold => anomaly (1); error <= threshold => normal (0).
/// The boundary itself counts as normal.
std::vector<std::uint8_t> classify(const std::vector<double>& errors, double threshold);

/// 2x2 counts with anomaly as the positive class.
struct Confusion {
  long tp = 0, fp = 0, tn = 0, fn = 0;
  long total() const { return tp + fp + tn + fn; }
  double accuracy() const {
    return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
  }
};

Confusion confusion_and_accuracy(const std::vector<std::uint8_t>& predicted,
                                 const std::vector<std::uint8_t>& truth);

/// Per-sample mean squared reconstruction error.
std::vector<double> reconstruction_errors(const CaeModel& model, const Tensor4& images);
std::vector<double> reconstruction_errors(const PcaModel& model, const Eigen::MatrixXd& X);
std::vector<double> reconstruction_errors(const IcaModel& model, const Eigen::MatrixXd& X);

struct NuSweepRow {
  double nu = 0.0;
  double accuracy = 0.0;
  long fp = 0, fn = 0;
  double train_outlier_fraction = 0.0; // training points scored negative
  double sv_fraction = 0.0;            // alpha > 0
};

/// One ocSVM fit + evaluation per nu on fixed features.
std::vector<NuSweepRow> nu_sweep(const Eigen::MatrixXd& train_features,
                                 const Eigen::MatrixXd& test_features,
                                 const std::vector<std::uint8_t>& test_truth,
                                 const std::vector<double>& nus, const KernelSpec& kernel);

/// Default grid 0.1, 0.2, ..., 0.9.
std::vector<double> default_nu_grid();

struct Evaluation {
  std::string rule; // "q99", "max", or "nu=0.3"
  double threshold = 0.0;
  Confusion cm;
};

struct DetectionReport {
  Method method = Method::cae;
  std::vector<double> scores;          // test reconstruction errors / decision values
  std::vector<std::uint8_t> truth;     // 1 = damaged
  std::vector<std::uint8_t> predicted; // under the primary rule
  std::string primary_rule;
  double threshold = 0.0; // primary threshold (ocSVM methods decide at 0)
  Confusion cm;
  double accuracy = 0.0;
  std::vector<Evaluation> evaluations; // every rule / nu evaluated
  std::map<std::string, std::string> config_snapshot;
  std::uint64_t seed = 0;
};

void write_report_json(const DetectionReport& report, const std::filesystem::path& file);
DetectionReport load_report_json(const std::filesystem::path& file);

} // namespace wavescope
