#include "wavescope/detect.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "wavescope/errors.hpp"

namespace wavescope {

const char* method_name(Method m) {
  switch (m) {
    case Method::pca_ocsvm: return "pca_ocsvm";
    case Method::ica_ocsvm: return "ica_ocsvm";
    case Method::cae: return "cae";
  }
  return "cae";
}

Method method_from_name(const std::string& name) {
  if (name == "pca_ocsvm") return Method::pca_ocsvm;
  if (name == "ica_ocsvm") return Method::ica_ocsvm;
  if (name == "cae") return Method::cae;
  throw InvalidArgument("unknown method '" + name + "'");
}

double compute_threshold(const std::vector<double>& train_errors, const ThresholdRule& rule) {
  if (train_errors.empty()) throw InvalidArgument("compute_threshold: empty error vector");
  if (rule.kind == ThresholdRule::Kind::max)
    return *std::max_element(train_errors.begin(), train_errors.end());
  if (!(rule.q > 0) || rule.q > 1) throw InvalidArgument("quantile q must be in (0, 1]");
  std::vector<double> sorted = train_errors;
  std::sort(sorted.begin(), sorted.end());
  const double pos = rule.q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<std::uint8_t> classify(const std::vector<double>& errors, double threshold) {
  if (!std::isfinite(threshold)) throw InvalidArgument("classify: threshold must be finite");
  std::vector<std::uint8_t> labels(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) labels[i] = errors[i] > threshold ? 1 : 0;
  return labels;
}

Confusion confusion_and_accuracy(const std::vector<std::uint8_t>& predicted,
                                 const std::vector<std::uint8_t>& truth) {
  if (predicted.size() != truth.size())
    throw InvalidArgument("confusion_and_accuracy: length mismatch");
  Confusion cm;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (truth[i]) {
      predicted[i] ? ++cm.tp : ++cm.fn;
    } else {
      predicted[i] ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

std::vector<double> reconstruction_errors(const CaeModel& model, const Tensor4& images) {
  const ForwardResult res = forward_infer(model, images);
  std::vector<double> errors(static_cast<std::size_t>(images.n), 0.0);
  const std::size_t per = images.per_sample();
  for (int i = 0; i < images.n; ++i) {
    double s = 0.0;
    const std::size_t base = static_cast<std::size_t>(i) * per;
    for (std::size_t k = 0; k < per; ++k) {
      const double d = res.reconstruction.v[base + k] - images.v[base + k];
      s += d * d;
    }
    errors[static_cast<std::size_t>(i)] = s / static_cast<double>(per);
  }
  return errors;
}

namespace {

std::vector<double> rowwise_mse(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  std::vector<double> errors(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    errors[static_cast<std::size_t>(i)] =
        (a.row(i) - b.row(i)).squaredNorm() / static_cast<double>(a.cols());
  return errors;
}

} // namespace

std::vector<double> reconstruction_errors(const PcaModel& model, const Eigen::MatrixXd& X) {
  return rowwise_mse(pca_inverse(model, pca_transform(model, X)), X);
}

std::vector<double> reconstruction_errors(const IcaModel& model, const Eigen::MatrixXd& X) {
  return rowwise_mse(ica_inverse(model, ica_transform(model, X)), X);
}

std::vector<double> default_nu_grid() {
  return {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

std::vector<NuSweepRow> nu_sweep(const Eigen::MatrixXd& train_features,
                                 const Eigen::MatrixXd& test_features,
                                 const std::vector<std::uint8_t>& test_truth,
                                 const std::vector<double>& nus, const KernelSpec& kernel) {
  if (static_cast<std::size_t>(test_features.rows()) != test_truth.size())
    throw InvalidArgument("nu_sweep: test feature/label length mismatch");
  std::vector<NuSweepRow> rows;
  rows.reserve(nus.size());
  const double n_train = static_cast<double>(train_features.rows());
  for (double nu : nus) {
    const OcsvmModel model = ocsvm_fit(train_features, nu, kernel);
    NuSweepRow row;
    row.nu = nu;
    // unbounded SVs sit numerically on the boundary (score ~ +-1e-9), so the
    // outlier count uses a band at the solver tolerance
    const Eigen::VectorXd train_scores = decision_values(model, train_features);
    row.train_outlier_fraction =
        static_cast<double>((train_scores.array() < -1e-7).count()) / n_train;
    row.sv_fraction = static_cast<double>(model.alphas.size()) / n_train;
    const std::vector<std::uint8_t> predicted = predict(model, test_features);
    const Confusion cm = confusion_and_accuracy(predicted, test_truth);
    row.accuracy = cm.accuracy();
    row.fp = cm.fp;
    row.fn = cm.fn;
    rows.push_back(row);
  }
  return rows;
}

namespace {

using nlohmann::json;

json confusion_to_json(const Confusion& cm) {
  return json{{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn},
              {"accuracy", cm.accuracy()}};
}

Confusion confusion_from_json(const json& j) {
  Confusion cm;
  cm.tp = j.at("tp").get<long>();
  cm.fp = j.at("fp").get<long>();
  cm.tn = j.at("tn").get<long>();
  cm.fn = j.at("fn").get<long>();
  return cm;
}

} // namespace

void write_report_json(const DetectionReport& report, const std::filesystem::path& file) {
  json j;
  j["method"] = method_name(report.method);
  j["positive_class"] = "anomaly"; // convention stated in every report
  j["seed"] = report.seed;
  j["primary_rule"] = report.primary_rule;
  j["threshold"] = report.threshold;
  j["confusion"] = confusion_to_json(report.cm);
  j["accuracy"] = report.accuracy;
  j["scores"] = report.scores;
  j["truth"] = report.truth;
  j["predicted"] = report.predicted;
  json evals = json::array();
  for (const auto& e : report.evaluations)
    evals.push_back(
        {{"rule", e.rule}, {"threshold", e.threshold}, {"confusion", confusion_to_json(e.cm)}});
  j["evaluations"] = evals;
  j["config"] = report.config_snapshot;
  std::ofstream os(file);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  os << j.dump(2) << "\n";
  if (!os) throw Error("write failed on " + file.string());
}

DetectionReport load_report_json(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw Error("cannot open " + file.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw FormatError(FormatFault::malformed_header, file.string() + ": " + e.what());
  }
  DetectionReport report;
  try {
    report.method = method_from_name(j.at("method").get<std::string>());
    report.seed = j.at("seed").get<std::uint64_t>();
    report.primary_rule = j.at("primary_rule").get<std::string>();
    report.threshold = j.at("threshold").get<double>();
    report.cm = confusion_from_json(j.at("confusion"));
    report.accuracy = j.at("accuracy").get<double>();
    report.scores = j.at("scores").get<std::vector<double>>();
    report.truth = j.at("truth").get<std::vector<std::uint8_t>>();
    report.predicted = j.at("predicted").get<std::vector<std::uint8_t>>();
    for (const auto& e : j.at("evaluations")) {
      Evaluation ev;
      ev.rule = e.at("rule").get<std::string>();
      ev.threshold = e.at("threshold").get<double>();
      ev.cm = confusion_from_json(e.at("confusion"));
      report.evaluations.push_back(ev);
    }
    if (j.contains("config"))
      report.config_snapshot = j.at("config").get<std::map<std::string, std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(FormatFault::bad_value, file.string() + ": " + e.what());
  }
  return report;
}

} // namespace wavescope
