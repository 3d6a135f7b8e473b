#include "wavescope/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "wavescope/parallel.hpp"
#include "wavescope/rng.hpp"
#include "wavescope/scalogram.hpp"

namespace wavescope {

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct StageClock {
  std::vector<std::pair<std::string, double>> timings;
  Clock::time_point mark = Clock::now();
  void lap(const std::string& stage) {
    timings.emplace_back(stage, ms_since(mark));
    mark = Clock::now();
  }
};

void write_csv(const fs::path& file, const std::string& header,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream os(file);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  os << header << "\n";
  char buf[64];
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", row[i]);
      os << (i ? "," : "") << buf;
    }
    os << "\n";
  }
}

Eigen::MatrixXd flatten_images(const std::vector<ImageTensor>& images) {
  if (images.empty()) throw InvalidArgument("no images to flatten");
  const auto d = images.front().pixels.size();
  Eigen::MatrixXd X(static_cast<Eigen::Index>(images.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto flat = flatten(images[i]);
    for (std::size_t j = 0; j < d; ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = flat[j];
  }
  return X;
}

std::map<std::string, std::string> snapshot(const RunConfig& cfg, int repeat) {
  std::map<std::string, std::string> snap;
  std::istringstream is(echo_config(cfg));
  std::string line, section;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    snap[section + "." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  snap["repeat"] = std::to_string(repeat);
  return snap;
}

DetectionReport subspace_report(Method method, const SubspaceMethodConfig& mc,
                                const Eigen::MatrixXd& train_flat,
                                const Eigen::MatrixXd& test_flat,
                                const std::vector<std::uint8_t>& truth, std::uint64_t seed,
                                const fs::path& models_dir, const fs::path& csv_dir,
                                int repeat) {
  Eigen::MatrixXd train_feats, test_feats;
  if (method == Method::pca_ocsvm) {
    const PcaModel pca = pca_fit(train_flat, mc.components);
    save_pca(pca, models_dir / ("pca_run" + std::to_string(repeat) + ".wsub"));
    train_feats = pca_transform(pca, train_flat);
    test_feats = pca_transform(pca, test_flat);
  } else {
    const IcaModel ica = fastica_fit(train_flat, mc.components, 1e-4, 500, seed);
    save_ica(ica, models_dir / ("ica_run" + std::to_string(repeat) + ".wsub"));
    train_feats = ica_transform(ica, train_flat);
    test_feats = ica_transform(ica, test_flat);
  }

  const KernelSpec kernel{default_rbf_gamma(train_feats)};
  const auto rows = nu_sweep(train_feats, test_feats, truth, mc.nu_grid, kernel);

  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].accuracy > rows[best].accuracy) best = i;

  DetectionReport report;
  report.method = method;
  report.truth = truth;
  report.seed = seed;

  const OcsvmModel model = ocsvm_fit(train_feats, rows[best].nu, kernel);
  save_ocsvm(model, models_dir / (std::string(method_name(method)) + "_run" +
                                  std::to_string(repeat) + ".wsub"));
  const Eigen::VectorXd scores = decision_values(model, test_feats);
  report.scores.assign(scores.data(), scores.data() + scores.size());
  report.predicted = predict(model, test_feats);
  char rule[32];
  std::snprintf(rule, sizeof rule, "nu=%.3g", rows[best].nu);
  report.primary_rule = rule;
  report.threshold = 0.0; // decision boundary
  report.cm = confusion_and_accuracy(report.predicted, truth);
  report.accuracy = report.cm.accuracy();
  for (const auto& row : rows) {
    Evaluation ev;
    std::snprintf(rule, sizeof rule, "nu=%.3g", row.nu);
    ev.rule = rule;
    ev.threshold = 0.0;
    ev.cm.fp = row.fp;
    ev.cm.fn = row.fn;
    const long damaged = static_cast<long>(std::count(truth.begin(), truth.end(), 1));
    ev.cm.tp = damaged - row.fn;
    ev.cm.tn = static_cast<long>(truth.size()) - damaged - row.fp;
    report.evaluations.push_back(ev);
  }

  std::vector<std::vector<double>> csv_rows;
  for (const auto& row : rows)
    csv_rows.push_back({row.nu, row.accuracy, static_cast<double>(row.fp),
                        static_cast<double>(row.fn), row.train_outlier_fraction,
                        row.sv_fraction});
  write_csv(csv_dir / ("nu_sweep_" + std::string(method_name(method)) + "_run" +
                       std::to_string(repeat) + ".csv"),
            "nu,accuracy,fp,fn,train_outlier_fraction,sv_fraction", csv_rows);
  return report;
}

DetectionReport cae_report(const RunConfig& cfg, const std::vector<ImageTensor>& train_images,
                           const std::vector<ImageTensor>& test_images,
                           const std::vector<std::uint8_t>& truth, std::uint64_t seed,
                           const fs::path& models_dir, const fs::path& csv_dir, int repeat) {
  const Shape3 input{cfg.height, cfg.width, cfg.channels};
  CaeSpec spec = cfg.cae.preset == "paper-shape" ? paper_shape_preset() : desk_preset(input);
  if (cfg.cae.preset == "paper-shape" && !(spec.input == input))
    throw InvalidArgument("paper-shape preset requires 256x256x3 images");

  CaeModel model = build_cae(spec, seed);
  const Tensor4 train_batch = batch_from_images(train_images);
  const TrainHistory history =
      train(model, train_batch, cfg.cae.epochs, cfg.cae.lr, cfg.cae.batch, seed);
  save_cae(model, models_dir / ("cae_run" + std::to_string(repeat) + ".wcae"));

  std::vector<std::vector<double>> loss_rows;
  for (std::size_t e = 0; e < history.mse.size(); ++e)
    loss_rows.push_back({static_cast<double>(e + 1), history.mse[e], history.mae[e],
                         history.r2[e], history.wall_ms[e]});
  write_csv(csv_dir / ("cae_loss_run" + std::to_string(repeat) + ".csv"),
            "epoch,mse,mae,r2,wall_ms", loss_rows);

  const std::vector<double> train_errors = reconstruction_errors(model, train_batch);
  const Tensor4 test_batch = batch_from_images(test_images);
  const std::vector<double> test_errors = reconstruction_errors(model, test_batch);

  const double thr_q = compute_threshold(train_errors, {ThresholdRule::Kind::quantile,
                                                        cfg.threshold.q});
  const double thr_max = compute_threshold(train_errors, {ThresholdRule::Kind::max, 1.0});
  const bool primary_is_max = cfg.threshold.kind == ThresholdRule::Kind::max;

  DetectionReport report;
  report.method = Method::cae;
  report.truth = truth;
  report.seed = seed;
  report.scores = test_errors;
  report.threshold = primary_is_max ? thr_max : thr_q;
  report.primary_rule = primary_is_max ? "max" : "q99";
  report.predicted = classify(test_errors, report.threshold);
  report.cm = confusion_and_accuracy(report.predicted, truth);
  report.accuracy = report.cm.accuracy();
  for (const auto& [rule, thr] : {std::pair<std::string, double>{"q99", thr_q},
                                  std::pair<std::string, double>{"max", thr_max}}) {
    Evaluation ev;
    ev.rule = rule;
    ev.threshold = thr;
    ev.cm = confusion_and_accuracy(classify(test_errors, thr), truth);
    report.evaluations.push_back(ev);
  }

  std::vector<std::vector<double>> err_rows;
  for (std::size_t i = 0; i < test_errors.size(); ++i)
    err_rows.push_back({static_cast<double>(i), test_errors[i],
                        static_cast<double>(truth[i]), thr_q, thr_max});
  write_csv(csv_dir / ("cae_errors_run" + std::to_string(repeat) + ".csv"),
            "index,error,truth,threshold_q99,threshold_max", err_rows);

  const Eigen::MatrixXd codes = latent_codes(model, test_batch);
  std::vector<std::vector<double>> code_rows;
  for (Eigen::Index i = 0; i < codes.rows(); ++i) {
    std::vector<double> row;
    for (Eigen::Index j = 0; j < codes.cols(); ++j) row.push_back(codes(i, j));
    row.push_back(static_cast<double>(truth[static_cast<std::size_t>(i)]));
    code_rows.push_back(row);
  }
  std::string header;
  for (Eigen::Index j = 0; j < codes.cols(); ++j) header += "c" + std::to_string(j + 1) + ",";
  header += "truth";
  write_csv(csv_dir / ("cae_latent_run" + std::to_string(repeat) + ".csv"), header, code_rows);
  return report;
}

} // namespace

std::vector<ImageTensor> images_from_records(const std::vector<TimeSeriesRecord>& records,
                                             const WaveletParams& wp, int height, int width,
                                             int channels) {
  std::vector<ImageTensor> images(records.size());
  parallel_for(records.size(), [&](std::size_t i) {
    images[i] = to_image(cwt(records[i], wp), height, width, channels);
    images[i].label = records[i].label;
  });
  return images;
}

std::vector<DetectionReport> run_pipeline(const RunConfig& cfg, const fs::path& out_dir) {
  if (cfg.methods.empty()) throw InvalidArgument("run_pipeline: no methods configured");
  fs::create_directories(out_dir);
  for (const char* sub : {"dataset", "images", "models", "reports", "csv"})
    fs::create_directories(out_dir / sub);

  {
    std::ofstream os(out_dir / "resolved.cfg");
    if (!os) throw Error("cannot write resolved.cfg");
    os << echo_config(cfg);
  }

  StageClock clocks;
  std::vector<DetectionReport> reports;

  DatasetSplit loaded;
  const bool from_path = !cfg.dataset_path.empty();
  if (from_path) loaded = load_dataset(cfg.dataset_path);

  for (int rep = 0; rep < cfg.repeats; ++rep) {
    const std::uint64_t run_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(rep));
    DatasetSplit split;
    try {
      if (from_path) {
        split = loaded;
      } else {
        split = build_dataset(cfg.generation(), run_seed);
        save_dataset(split, out_dir / "dataset" / ("run" + std::to_string(rep)));
      }
    } catch (const Error& e) {
      throw Error("stage[dataset]: " + std::string(e.what()));
    }
    clocks.lap("dataset_run" + std::to_string(rep));

    WaveletParams wp = WaveletParams::defaults_for(
        split.train_baseline.front().sample_rate, cfg.n_scales, cfg.morse_beta, cfg.morse_gamma);

    std::vector<ImageTensor> train_images, test_images;
    try {
      train_images =
          images_from_records(split.train_baseline, wp, cfg.height, cfg.width, cfg.channels);
      auto test_b =
          images_from_records(split.test_baseline, wp, cfg.height, cfg.width, cfg.channels);
      auto test_d =
          images_from_records(split.test_damaged, wp, cfg.height, cfg.width, cfg.channels);
      test_images = std::move(test_b);
      test_images.insert(test_images.end(), test_d.begin(), test_d.end());
      save_images(train_images,
                  out_dir / "images" / ("train_run" + std::to_string(rep) + ".img"));
      save_images(test_images, out_dir / "images" / ("test_run" + std::to_string(rep) + ".img"));
    } catch (const Error& e) {
      throw Error("stage[cwt]: " + std::string(e.what()));
    }
    clocks.lap("cwt_run" + std::to_string(rep));

    std::vector<std::uint8_t> truth(test_images.size());
    for (std::size_t i = 0; i < test_images.size(); ++i)
      truth[i] = test_images[i].label == Label::damaged ? 1 : 0;

    Eigen::MatrixXd train_flat, test_flat;
    const bool needs_subspace =
        std::any_of(cfg.methods.begin(), cfg.methods.end(),
                    [](Method m) { return m != Method::cae; });
    if (needs_subspace) {
      train_flat = flatten_images(train_images);
      test_flat = flatten_images(test_images);
    }

    for (Method method : cfg.methods) {
      try {
        if (method == Method::cae) {
          auto report = cae_report(cfg, train_images, test_images, truth, run_seed,
                                   out_dir / "models", out_dir / "csv", rep);
          report.config_snapshot = snapshot(cfg, rep);
          reports.push_back(std::move(report));
        } else {
          const auto& mc = method == Method::pca_ocsvm ? cfg.pca : cfg.ica;
          auto report = subspace_report(method, mc, train_flat, test_flat, truth, run_seed,
                                        out_dir / "models", out_dir / "csv", rep);
          report.config_snapshot = snapshot(cfg, rep);
          reports.push_back(std::move(report));
        }
      } catch (const Error& e) {
        throw Error("stage[" + std::string(method_name(method)) + "]: " +
                    std::string(e.what()));
      }
      write_report_json(reports.back(),
                        out_dir / "reports" /
                            (std::string(method_name(reports.back().method)) + "_run" +
                             std::to_string(rep) + ".json"));
      clocks.lap(std::string(method_name(method)) + "_run" + std::to_string(rep));
    }
  }

  std::ofstream man(out_dir / "run.manifest");
  if (!man) throw Error("cannot write run.manifest");
  man << "version=0.1.0\n";
  man << "seed=" << cfg.seed << "\n";
  man << "repeats=" << cfg.repeats << "\n";
  man << "threads=" << worker_count() << "\n";
  for (const auto& [stage, ms] : clocks.timings) man << "ms_" << stage << "=" << ms << "\n";
  return reports;
}

} // namespace wavescope
