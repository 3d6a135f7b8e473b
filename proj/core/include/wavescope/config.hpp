#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wavescope/detect.hpp"
#include "wavescope/wavegen.hpp"

namespace wavescope {

struct SubspaceMethodConfig {
  int components = 3;
  double nu = 0.1;
  std::vector<double> nu_grid = default_nu_grid();
  bool operator==(const SubspaceMethodConfig&) const = default;
};

struct CaeMethodConfig {
  std::string preset = "desk"; // desk | paper-shape
  int epochs = 300;
  double lr = 1e-3;
  int batch = 32;
  bool operator==(const CaeMethodConfig&) const = default;
};

/// Fully resolved run configuration. Field defaults are the documented
/// defaults; parse_config() starts from them, applies the chosen preset, then
/// explicit keys.
struct RunConfig {
  // [dataset]
  std::string dataset_preset = "desk"; // desk | dataset1-scale; ignored when path set
  std::string dataset_path;            // load an existing dataset directory
  int train_baseline = 200;
  int test_baseline = 100;
  int test_damaged = 100;
  double snr_db = 30.0;
  double sample_rate = 2e6;
  double duration = 5e-3;
  double damage_amplitude = 0.7;
  double damage_delay = 10e-6;
  std::vector<ModeTag> damage_modes{ModeTag::a0}; // empty = all packets
  std::vector<double> augment_snrs;    // extra noisy train copies, dB levels
  double velocity_jitter = 0.03;  // common per-record wave-speed drift
  double arrival_jitter = 2e-6;   // per-packet trigger jitter, s
  double amplitude_jitter = 0.02; // per-packet relative amplitude jitter

  // [representation]
  int height = 64;
  int width = 64;
  int channels = 1;
  double morse_beta = 20.0;
  double morse_gamma = 3.0;
  int n_scales = 64;

  // [methods] + per-method sections
  std::vector<Method> methods{Method::pca_ocsvm, Method::ica_ocsvm, Method::cae};
  SubspaceMethodConfig pca;
  SubspaceMethodConfig ica;
  CaeMethodConfig cae;

  // [thresholds]
  ThresholdRule threshold{ThresholdRule::Kind::quantile, 0.99};

  // [run]
  std::uint64_t seed = 42;
  int repeats = 1;

  GenerationConfig generation() const;
  bool operator==(const RunConfig&) const;
};

/// Parses the line-oriented key=value grammar (see README). Unknown sections
/// or keys and out-of-range values raise ConfigError with the line number.
RunConfig parse_config(const std::string& text);
RunConfig parse_config_file(const std::filesystem::path& file);

/// Canonical text carrying every resolved key; parse_config(echo_config(c))
/// reproduces c exactly.
std::string echo_config(const RunConfig& cfg);

} // namespace wavescope
