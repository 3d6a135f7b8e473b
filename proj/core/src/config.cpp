#include "wavescope/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace wavescope {

namespace {

const char* mode_name(ModeTag tag) {
  switch (tag) {
    case ModeTag::s0: return "s0";
    case ModeTag::a0: return "a0";
    case ModeTag::reflection: return "reflection";
  }
  return "a0";
}

ModeTag mode_from_name(const std::string& name, int line) {
  if (name == "s0") return ModeTag::s0;
  if (name == "a0") return ModeTag::a0;
  if (name == "reflection") return ModeTag::reflection;
  throw ConfigError(line, "unknown mode tag '" + name + "'");
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream is(value);
  while (std::getline(is, item, ',')) {
    const auto a = item.find_first_not_of(" \t");
    const auto b = item.find_last_not_of(" \t");
    if (a == std::string::npos) continue;
    parts.push_back(item.substr(a, b - a + 1));
  }
  return parts;
}

double parse_double(const std::string& v, int line) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected a number, got '" + v + "'");
  }
}

long parse_int(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected an integer, got '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const std::uint64_t x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(line, "expected an unsigned integer, got '" + v + "'");
  }
}

/// "0.1:0.9:0.1" or a plain comma list. Grid points snap to a 1e-9 lattice so
/// 0.1 + 2*0.2 comes out as exactly 0.5.
std::vector<double> parse_grid(const std::string& v, int line) {
  std::vector<double> grid;
  if (v.find(':') != std::string::npos) {
    const auto parts = split_list([&] {
      std::string s = v;
      std::replace(s.begin(), s.end(), ':', ',');
      return s;
    }());
    if (parts.size() != 3) throw ConfigError(line, "grid must be start:stop:step");
    const double start = parse_double(parts[0], line);
    const double stop = parse_double(parts[1], line);
    const double step = parse_double(parts[2], line);
    if (!(step > 0) || stop < start) throw ConfigError(line, "bad grid bounds");
    const long count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (long i = 0; i < count; ++i)
      grid.push_back(std::round((start + static_cast<double>(i) * step) * 1e9) / 1e9);
  } else {
    for (const auto& item : split_list(v)) grid.push_back(parse_double(item, line));
  }
  if (grid.empty()) throw ConfigError(line, "empty grid");
  for (double nu : grid)
    if (!(nu > 0) || nu > 1) throw ConfigError(line, "nu values must be in (0, 1]");
  return grid;
}

void apply_dataset_preset(RunConfig& cfg, const std::string& preset, int line) {
  if (preset == "desk") {
    cfg.train_baseline = 200;
    cfg.test_baseline = 100;
    cfg.test_damaged = 100;
  } else if (preset == "dataset1-scale") {
    cfg.train_baseline = 2125;
    cfg.test_baseline = 1438;
    cfg.test_damaged = 1437;
  } else {
    throw ConfigError(line, "unknown dataset preset '" + preset + "'");
  }
  cfg.dataset_preset = preset;
}

std::string format_double(double x) {
  if (std::isinf(x)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

} // namespace

GenerationConfig RunConfig::generation() const {
  GenerationConfig gen;
  gen.sample_rate = sample_rate;
  gen.duration = duration;
  gen.noise_snr_db = snr_db;
  gen.train_baseline = train_baseline;
  gen.test_baseline = test_baseline;
  gen.test_damaged = test_damaged;
  gen.damage.amplitude_factor = damage_amplitude;
  gen.damage.phase_delay = damage_delay;
  gen.damage.applies_to = damage_modes;
  gen.augment_snrs_db = augment_snrs;
  gen.velocity_jitter_std = velocity_jitter;
  gen.arrival_jitter_std = arrival_jitter;
  gen.amplitude_jitter_std = amplitude_jitter;
  return gen;
}

bool RunConfig::operator==(const RunConfig& o) const {
  auto key = [](const RunConfig& c) {
    return std::tie(c.dataset_preset, c.dataset_path, c.train_baseline, c.test_baseline,
                    c.test_damaged, c.snr_db, c.sample_rate, c.duration, c.damage_amplitude,
                    c.damage_delay, c.damage_modes, c.augment_snrs, c.velocity_jitter, c.arrival_jitter,
                    c.amplitude_jitter,
                    c.height, c.width, c.channels, c.morse_beta,
                    c.morse_gamma, c.n_scales, c.methods, c.pca, c.ica, c.cae, c.seed, c.repeats);
  };
  return key(*this) == key(o) && threshold.kind == o.threshold.kind && threshold.q == o.threshold.q;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  std::string section;
  int lineno = 0;

  // two passes so `preset` applies before explicit keys regardless of order
  struct Entry {
    std::string section, key, value;
    int line;
  };
  std::vector<Entry> entries;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto a = line.find_first_not_of(" \t\r");
    if (a == std::string::npos) continue;
    const auto b = line.find_last_not_of(" \t\r");
    line = line.substr(a, b - a + 1);
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(lineno, "unterminated section header");
      section = line.substr(1, line.size() - 2);
      static const char* known[] = {"dataset",   "representation", "methods", "pca_ocsvm",
                                    "ica_ocsvm", "cae",            "thresholds", "run"};
      if (std::find_if(std::begin(known), std::end(known),
                       [&](const char* s) { return section == s; }) == std::end(known))
        throw ConfigError(lineno, "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(lineno, "expected key = value");
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto x = s.find_first_not_of(" \t");
      const auto y = s.find_last_not_of(" \t");
      s = x == std::string::npos ? "" : s.substr(x, y - x + 1);
    };
    trim(key);
    trim(value);
    if (key.empty()) throw ConfigError(lineno, "empty key");
    if (section.empty()) throw ConfigError(lineno, "key outside any [section]");
    entries.push_back({section, key, value, lineno});
  }

  for (const auto& e : entries)
    if (e.section == "dataset" && e.key == "preset") apply_dataset_preset(cfg, e.value, e.line);

  for (const auto& e : entries) {
    const std::string& k = e.key;
    const std::string& v = e.value;
    const int ln = e.line;
    if (e.section == "dataset") {
      if (k == "preset") continue; // applied above
      if (k == "path")
        cfg.dataset_path = v;
      else if (k == "train_baseline") {
        cfg.train_baseline = static_cast<int>(parse_int(v, ln));
        if (cfg.train_baseline < 1) throw ConfigError(ln, "train_baseline must be positive");
      } else if (k == "test_baseline") {
        cfg.test_baseline = static_cast<int>(parse_int(v, ln));
        if (cfg.test_baseline < 0) throw ConfigError(ln, "test_baseline must be >= 0");
      } else if (k == "test_damaged") {
        cfg.test_damaged = static_cast<int>(parse_int(v, ln));
        if (cfg.test_damaged < 0) throw ConfigError(ln, "test_damaged must be >= 0");
      } else if (k == "snr_db")
        cfg.snr_db = parse_double(v, ln);
      else if (k == "sample_rate") {
        cfg.sample_rate = parse_double(v, ln);
        if (!(cfg.sample_rate > 0)) throw ConfigError(ln, "sample_rate must be positive");
      } else if (k == "duration") {
        cfg.duration = parse_double(v, ln);
        if (!(cfg.duration > 0)) throw ConfigError(ln, "duration must be positive");
      } else if (k == "damage_amplitude") {
        cfg.damage_amplitude = parse_double(v, ln);
        if (!(cfg.damage_amplitude > 0) || cfg.damage_amplitude > 1)
          throw ConfigError(ln, "damage_amplitude must be in (0, 1]");
      } else if (k == "damage_delay") {
        cfg.damage_delay = parse_double(v, ln);
        if (cfg.damage_delay < 0) throw ConfigError(ln, "damage_delay must be >= 0");
      } else if (k == "augment_snrs") {
        cfg.augment_snrs.clear();
        for (const auto& item : split_list(v)) cfg.augment_snrs.push_back(parse_double(item, ln));
      } else if (k == "velocity_jitter") {
        cfg.velocity_jitter = parse_double(v, ln);
        if (cfg.velocity_jitter < 0) throw ConfigError(ln, "velocity_jitter must be >= 0");
      } else if (k == "arrival_jitter") {
        cfg.arrival_jitter = parse_double(v, ln);
        if (cfg.arrival_jitter < 0) throw ConfigError(ln, "arrival_jitter must be >= 0");
      } else if (k == "amplitude_jitter") {
        cfg.amplitude_jitter = parse_double(v, ln);
        if (cfg.amplitude_jitter < 0) throw ConfigError(ln, "amplitude_jitter must be >= 0");
      } else if (k == "damage_modes") {
        cfg.damage_modes.clear();
        if (v != "all")
          for (const auto& item : split_list(v))
            cfg.damage_modes.push_back(mode_from_name(item, ln));
      } else
        throw ConfigError(ln, "unknown key '" + k + "' in [dataset]");
    } else if (e.section == "representation") {
      if (k == "height" || k == "width") {
        const int x = static_cast<int>(parse_int(v, ln));
        if (x < 1) throw ConfigError(ln, k + " must be positive");
        (k == "height" ? cfg.height : cfg.width) = x;
      } else if (k == "channels") {
        cfg.channels = static_cast<int>(parse_int(v, ln));
        if (cfg.channels != 1 && cfg.channels != 3)
          throw ConfigError(ln, "channels must be 1 or 3");
      } else if (k == "morse_beta") {
        cfg.morse_beta = parse_double(v, ln);
        if (!(cfg.morse_beta > 0)) throw ConfigError(ln, "morse_beta must be positive");
      } else if (k == "morse_gamma") {
        cfg.morse_gamma = parse_double(v, ln);
        if (!(cfg.morse_gamma > 0)) throw ConfigError(ln, "morse_gamma must be positive");
      } else if (k == "scales") {
        cfg.n_scales = static_cast<int>(parse_int(v, ln));
        if (cfg.n_scales < 2) throw ConfigError(ln, "scales must be >= 2");
      } else
        throw ConfigError(ln, "unknown key '" + k + "' in [representation]");
    } else if (e.section == "methods") {
      if (k == "list") {
        cfg.methods.clear();
        for (const auto& item : split_list(v)) {
          try {
            cfg.methods.push_back(method_from_name(item));
          } catch (const InvalidArgument& err) {
            throw ConfigError(ln, err.what());
          }
        }
        if (cfg.methods.empty()) throw ConfigError(ln, "method list is empty");
      } else
        throw ConfigError(ln, "unknown key '" + k + "' in [methods]");
    } else if (e.section == "pca_ocsvm" || e.section == "ica_ocsvm") {
      SubspaceMethodConfig& mc = e.section == "pca_ocsvm" ? cfg.pca : cfg.ica;
      if (k == "components") {
        mc.components = static_cast<int>(parse_int(v, ln));
        if (mc.components < 1) throw ConfigError(ln, "components must be positive");
      } else if (k == "nu") {
        mc.nu = parse_double(v, ln);
        if (!(mc.nu > 0) || mc.nu > 1) throw ConfigError(ln, "nu must be in (0, 1]");
      } else if (k == "nu_grid")
        mc.nu_grid = parse_grid(v, ln);
      else
        throw ConfigError(ln, "unknown key '" + k + "' in [" + e.section + "]");
    } else if (e.section == "cae") {
      if (k == "preset") {
        if (v != "desk" && v != "paper-shape")
          throw ConfigError(ln, "cae preset must be desk or paper-shape");
        cfg.cae.preset = v;
      } else if (k == "epochs") {
        cfg.cae.epochs = static_cast<int>(parse_int(v, ln));
        if (cfg.cae.epochs < 0) throw ConfigError(ln, "epochs must be >= 0");
      } else if (k == "lr") {
        cfg.cae.lr = parse_double(v, ln);
        if (!(cfg.cae.lr > 0)) throw ConfigError(ln, "lr must be positive");
      } else if (k == "batch") {
        cfg.cae.batch = static_cast<int>(parse_int(v, ln));
        if (cfg.cae.batch < 1) throw ConfigError(ln, "batch must be positive");
      } else
        throw ConfigError(ln, "unknown key '" + k + "' in [cae]");
    } else if (e.section == "thresholds") {
      if (k == "rule") {
        if (v == "q99" || v == "quantile")
          cfg.threshold.kind = ThresholdRule::Kind::quantile;
        else if (v == "max")
          cfg.threshold.kind = ThresholdRule::Kind::max;
        else
          throw ConfigError(ln, "rule must be q99 or max");
      } else if (k == "q") {
        cfg.threshold.q = parse_double(v, ln);
        if (!(cfg.threshold.q > 0) || cfg.threshold.q > 1)
          throw ConfigError(ln, "q must be in (0, 1]");
      } else
        throw ConfigError(ln, "unknown key '" + k + "' in [thresholds]");
    } else if (e.section == "run") {
      if (k == "seed")
        cfg.seed = parse_u64(v, ln);
      else if (k == "repeats") {
        cfg.repeats = static_cast<int>(parse_int(v, ln));
        if (cfg.repeats < 1) throw ConfigError(ln, "repeats must be >= 1");
      } else
        throw ConfigError(ln, "unknown key '" + k + "' in [run]");
    }
  }
  return cfg;
}

RunConfig parse_config_file(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw Error("cannot open config " + file.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config(buf.str());
}

std::string echo_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "[dataset]\n";
  os << "preset = " << cfg.dataset_preset << "\n";
  if (!cfg.dataset_path.empty()) os << "path = " << cfg.dataset_path << "\n";
  os << "train_baseline = " << cfg.train_baseline << "\n";
  os << "test_baseline = " << cfg.test_baseline << "\n";
  os << "test_damaged = " << cfg.test_damaged << "\n";
  os << "snr_db = " << format_double(cfg.snr_db) << "\n";
  os << "sample_rate = " << format_double(cfg.sample_rate) << "\n";
  os << "duration = " << format_double(cfg.duration) << "\n";
  os << "damage_amplitude = " << format_double(cfg.damage_amplitude) << "\n";
  os << "damage_delay = " << format_double(cfg.damage_delay) << "\n";
  os << "augment_snrs = ";
  for (std::size_t i = 0; i < cfg.augment_snrs.size(); ++i)
    os << (i ? "," : "") << format_double(cfg.augment_snrs[i]);
  os << "\n";
  os << "velocity_jitter = " << format_double(cfg.velocity_jitter) << "\n";
  os << "arrival_jitter = " << format_double(cfg.arrival_jitter) << "\n";
  os << "amplitude_jitter = " << format_double(cfg.amplitude_jitter) << "\n";
  os << "damage_modes = ";
  if (cfg.damage_modes.empty()) {
    os << "all";
  } else {
    for (std::size_t i = 0; i < cfg.damage_modes.size(); ++i)
      os << (i ? "," : "") << mode_name(cfg.damage_modes[i]);
  }
  os << "\n\n[representation]\n";
  os << "height = " << cfg.height << "\n";
  os << "width = " << cfg.width << "\n";
  os << "channels = " << cfg.channels << "\n";
  os << "morse_beta = " << format_double(cfg.morse_beta) << "\n";
  os << "morse_gamma = " << format_double(cfg.morse_gamma) << "\n";
  os << "scales = " << cfg.n_scales << "\n";
  os << "\n[methods]\n";
  os << "list = ";
  for (std::size_t i = 0; i < cfg.methods.size(); ++i)
    os << (i ? "," : "") << method_name(cfg.methods[i]);
  os << "\n";
  for (const auto* mc : {&cfg.pca, &cfg.ica}) {
    os << "\n[" << (mc == &cfg.pca ? "pca_ocsvm" : "ica_ocsvm") << "]\n";
    os << "components = " << mc->components << "\n";
    os << "nu = " << format_double(mc->nu) << "\n";
    os << "nu_grid = ";
    for (std::size_t i = 0; i < mc->nu_grid.size(); ++i)
      os << (i ? "," : "") << format_double(mc->nu_grid[i]);
    os << "\n";
  }
  os << "\n[cae]\n";
  os << "preset = " << cfg.cae.preset << "\n";
  os << "epochs = " << cfg.cae.epochs << "\n";
  os << "lr = " << format_double(cfg.cae.lr) << "\n";
  os << "batch = " << cfg.cae.batch << "\n";
  os << "\n[thresholds]\n";
  os << "rule = " << (cfg.threshold.kind == ThresholdRule::Kind::max ? "max" : "q99") << "\n";
  os << "q = " << format_double(cfg.threshold.q) << "\n";
  os << "\n[run]\n";
  os << "seed = " << cfg.seed << "\n";
  os << "repeats = " << cfg.repeats << "\n";
  return os.str();
}

} // namespace wavescope
