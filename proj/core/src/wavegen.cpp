#include "wavescope/wavegen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "wavescope/bytes.hpp"
#include "wavescope/rng.hpp"

namespace wavescope {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

int sample_count(double sample_rate, double duration) {
  return static_cast<int>(std::llround(sample_rate * duration));
}

void check_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidArgument(std::string(what) + " contains non-finite samples");
}

/// Adds one Hann-windowed burst centered at `center` seconds into `out`.
void render_packet(std::vector<double>& out, double sample_rate, double cycles, double freq,
                   double amplitude, double center) {
  const double burst = cycles / freq;
  const double start = center - 0.5 * burst;
  const int n = static_cast<int>(out.size());
  int i0 = static_cast<int>(std::ceil(start * sample_rate));
  int i1 = static_cast<int>(std::floor((start + burst) * sample_rate));
  i0 = std::max(i0, 0);
  i1 = std::min(i1, n - 1);
  for (int i = i0; i <= i1; ++i) {
    const double u = (static_cast<double>(i) / sample_rate - start) / burst; // [0,1]
    const double hann = 0.5 * (1.0 - std::cos(kTwoPi * u));
    out[static_cast<std::size_t>(i)] += amplitude * hann * std::sin(kTwoPi * freq * u * burst);
  }
}

void validate_packets(const std::vector<WavePacketSpec>& packets, double sample_rate,
                      double duration) {
  if (sample_rate <= 0) throw InvalidArgument("sample_rate must be positive");
  if (duration <= 0) throw InvalidArgument("duration must be positive");
  for (const auto& p : packets) {
    if (p.cycles <= 0) throw InvalidArgument("packet cycles must be positive");
    if (p.center_freq <= 0) throw InvalidArgument("packet center_freq must be positive");
    if (p.arrival_time < 0) throw InvalidArgument("packet arrival_time must be non-negative");
    if (sample_rate < 10.0 * p.center_freq)
      throw InvalidArgument("sample_rate below the 10x Nyquist margin for a packet");
    const double half = 0.5 * p.cycles / p.center_freq;
    if (p.arrival_time - half < 0 || p.arrival_time + half > duration)
      throw InvalidArgument("packet burst does not fit inside the record duration");
  }
}

std::vector<double> render_clean(const std::vector<WavePacketSpec>& packets, double sample_rate,
                                 double duration) {
  std::vector<double> out(static_cast<std::size_t>(sample_count(sample_rate, duration)), 0.0);
  for (const auto& p : packets)
    render_packet(out, sample_rate, p.cycles, p.center_freq, p.amplitude, p.arrival_time);
  return out;
}

/// Noise scaled so energy(noise) = ref_energy / 10^(snr/10), making the
/// empirical SNR exact up to rounding.
void add_noise(std::vector<double>& samples, double ref_energy, double snr_db,
               std::uint64_t seed) {
  if (std::isinf(snr_db) && snr_db > 0) return;
  if (ref_energy <= 0) throw InvalidArgument("SNR undefined for zero-energy signal");
  SplitMix64 rng(seed);
  std::vector<double> noise(samples.size());
  double noise_energy = 0.0;
  for (auto& x : noise) {
    x = rng.next_gaussian();
    noise_energy += x * x;
  }
  if (noise_energy <= 0) return;
  const double target = ref_energy * std::pow(10.0, -snr_db / 10.0);
  const double c = std::sqrt(target / noise_energy);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] += c * noise[i];
}

std::string serialize_meta(const std::map<std::string, std::string>& meta) {
  std::string out;
  for (const auto& [k, v] : meta) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

std::map<std::string, std::string> parse_meta(const std::string& text) {
  std::map<std::string, std::string> meta;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

void write_split(const std::filesystem::path& file, const std::vector<TimeSeriesRecord>& recs) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(recs.size()));
  for (const auto& r : recs) {
    bytes::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(r.samples.size()));
    for (double x : r.samples) bytes::write_le<double>(os, x);
    bytes::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(r.label));
    const std::string meta = serialize_meta(r.meta);
    if (meta.size() > 0xffff) throw InvalidArgument("record metadata exceeds 64 KiB");
    bytes::write_le<std::uint16_t>(os, static_cast<std::uint16_t>(meta.size()));
    bytes::write_bytes(os, meta.data(), meta.size());
  }
  if (!os) throw Error("write failed on " + file.string());
}

std::vector<TimeSeriesRecord> read_split(const std::filesystem::path& file, double sample_rate,
                                         std::size_t expected_count) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file.string());
  const auto count = bytes::read_le<std::uint32_t>(is, "record count");
  if (count != expected_count)
    throw FormatError(FormatFault::length_mismatch,
                      file.string() + ": record count disagrees with manifest");
  std::vector<TimeSeriesRecord> recs(count);
  for (auto& r : recs) {
    const auto len = bytes::read_le<std::uint32_t>(is, "record length");
    r.samples.resize(len);
    for (auto& x : r.samples) x = bytes::read_le<double>(is, "sample");
    const auto code = bytes::read_le<std::uint8_t>(is, "label");
    if (code > 2)
      throw FormatError(FormatFault::bad_label, file.string() + ": label code out of range");
    r.label = static_cast<Label>(code);
    const auto meta_len = bytes::read_le<std::uint16_t>(is, "meta length");
    std::string meta(meta_len, '\0');
    if (meta_len) bytes::read_bytes(is, meta.data(), meta_len, "meta");
    r.meta = parse_meta(meta);
    r.sample_rate = sample_rate;
  }
  is.peek();
  if (!is.eof())
    throw FormatError(FormatFault::length_mismatch, file.string() + ": trailing bytes");
  return recs;
}

} // namespace

const char* label_name(Label l) {
  switch (l) {
    case Label::baseline: return "baseline";
    case Label::damaged: return "damaged";
    case Label::unlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Label label_from_name(const std::string& name) {
  if (name == "baseline") return Label::baseline;
  if (name == "damaged") return Label::damaged;
  if (name == "unlabeled") return Label::unlabeled;
  throw FormatError(FormatFault::bad_label, "unknown label '" + name + "'");
}

bool DamageTransform::applies(ModeTag tag) const {
  if (applies_to.empty()) return true;
  return std::find(applies_to.begin(), applies_to.end(), tag) != applies_to.end();
}

double signal_energy(const std::vector<double>& samples) {
  double e = 0.0;
  for (double x : samples) e += x * x;
  return e;
}

TimeSeriesRecord make_toneburst(double cycles, double center_freq, double amplitude,
                                double sample_rate, double duration) {
  if (cycles <= 0) throw InvalidArgument("cycles must be positive");
  if (center_freq <= 0) throw InvalidArgument("center_freq must be positive");
  if (sample_rate < 10.0 * center_freq)
    throw InvalidArgument("sample_rate must be at least 10x center_freq");
  const double burst = cycles / center_freq;
  if (duration < burst) throw InvalidArgument("duration shorter than the burst");

  TimeSeriesRecord rec;
  rec.sample_rate = sample_rate;
  rec.samples.assign(static_cast<std::size_t>(sample_count(sample_rate, duration)), 0.0);
  if (amplitude != 0.0)
    render_packet(rec.samples, sample_rate, cycles, center_freq, amplitude, duration * 0.5);
  return rec;
}

TimeSeriesRecord synth_baseline(const std::vector<WavePacketSpec>& packets, double noise_snr_db,
                                double sample_rate, double duration, std::uint64_t seed) {
  validate_packets(packets, sample_rate, duration);
  TimeSeriesRecord rec;
  rec.sample_rate = sample_rate;
  rec.label = Label::baseline;
  rec.samples = render_clean(packets, sample_rate, duration);
  if (!(std::isinf(noise_snr_db) && noise_snr_db > 0))
    add_noise(rec.samples, signal_energy(rec.samples), noise_snr_db, seed);
  return rec;
}

TimeSeriesRecord synth_damaged(const std::vector<WavePacketSpec>& packets,
                               const DamageTransform& dmg, double noise_snr_db,
                               double sample_rate, double duration, std::uint64_t seed) {
  if (dmg.amplitude_factor <= 0 || dmg.amplitude_factor > 1)
    throw InvalidArgument("amplitude_factor must be in (0, 1]");
  if (dmg.phase_delay < 0) throw InvalidArgument("phase_delay must be non-negative");

  std::vector<WavePacketSpec> transformed = packets;
  for (auto& p : transformed) {
    if (!dmg.applies(p.mode)) continue;
    p.amplitude *= dmg.amplitude_factor;
    p.arrival_time += dmg.phase_delay;
  }
  validate_packets(packets, sample_rate, duration);
  validate_packets(transformed, sample_rate, duration);

  TimeSeriesRecord rec;
  rec.sample_rate = sample_rate;
  rec.label = Label::damaged;
  rec.samples = render_clean(transformed, sample_rate, duration);
  if (!(std::isinf(noise_snr_db) && noise_snr_db > 0)) {
    // Noise floor anchored to the undamaged energy.
    const double ref = signal_energy(render_clean(packets, sample_rate, duration));
    add_noise(rec.samples, ref, noise_snr_db, seed);
  }
  return rec;
}

TimeSeriesRecord augment_noise(const TimeSeriesRecord& rec, double snr_db, std::uint64_t seed) {
  if (rec.samples.empty()) throw InvalidArgument("empty record");
  check_finite(rec.samples, "record");
  TimeSeriesRecord out = rec;
  if (std::isinf(snr_db) && snr_db > 0) return out;
  const double energy = signal_energy(rec.samples);
  if (energy <= 0) throw InvalidArgument("SNR undefined for zero-energy record");
  add_noise(out.samples, energy, snr_db, seed);
  return out;
}

namespace {

/// Gaussian truncated at +-2 sigma; keeps rare extreme draws from producing
/// unphysical packet positions.
double clipped_gaussian(SplitMix64& rng) {
  const double g = rng.next_gaussian();
  return std::clamp(g, -2.0, 2.0);
}

/// Run-to-run measurement variability: each record sees its own small
/// perturbation of the nominal packet list, drawn from a stream decorrelated
/// from the record's noise stream.
std::vector<WavePacketSpec> jittered_packets(const GenerationConfig& cfg,
                                             std::uint64_t record_seed) {
  std::vector<WavePacketSpec> packets = cfg.packets;
  if (cfg.velocity_jitter_std <= 0 && cfg.arrival_jitter_std <= 0 &&
      cfg.amplitude_jitter_std <= 0)
    return packets;
  SplitMix64 rng(derive_seed(record_seed, 0x7177e5ULL));
  const double velocity_shift = cfg.velocity_jitter_std * clipped_gaussian(rng);
  for (auto& p : packets) {
    p.arrival_time *= 1.0 + velocity_shift;
    p.arrival_time += cfg.arrival_jitter_std * clipped_gaussian(rng);
    p.amplitude *= 1.0 + cfg.amplitude_jitter_std * clipped_gaussian(rng);
  }
  return packets;
}

} // namespace

DatasetSplit build_dataset(const GenerationConfig& cfg, std::uint64_t seed) {
  if (cfg.train_baseline < 0 || cfg.test_baseline < 0 || cfg.test_damaged < 0)
    throw InvalidArgument("split counts must be non-negative");
  if (cfg.train_baseline == 0) throw InvalidArgument("train_baseline count must be positive");
  if (cfg.arrival_jitter_std < 0 || cfg.amplitude_jitter_std < 0 ||
      cfg.velocity_jitter_std < 0)
    throw InvalidArgument("jitter magnitudes must be non-negative");

  DatasetSplit split;
  split.seed = seed;
  std::uint64_t counter = 0;
  auto stamp = [](TimeSeriesRecord& r, const char* split_name, int index) {
    r.meta["split"] = split_name;
    r.meta["index"] = std::to_string(index);
  };
  for (int i = 0; i < cfg.train_baseline; ++i) {
    const std::uint64_t rec_seed = derive_seed(seed, counter++);
    auto r = synth_baseline(jittered_packets(cfg, rec_seed), cfg.noise_snr_db, cfg.sample_rate,
                            cfg.duration, rec_seed);
    stamp(r, "train_baseline", i);
    split.train_baseline.push_back(std::move(r));
  }
  const int originals = cfg.train_baseline;
  for (double snr : cfg.augment_snrs_db) {
    for (int i = 0; i < originals; ++i) {
      auto r = augment_noise(split.train_baseline[static_cast<std::size_t>(i)], snr,
                             derive_seed(seed, counter++));
      stamp(r, "train_baseline", static_cast<int>(split.train_baseline.size()));
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4g", snr);
      r.meta["augment_snr_db"] = buf;
      split.train_baseline.push_back(std::move(r));
    }
  }
  for (int i = 0; i < cfg.test_baseline; ++i) {
    const std::uint64_t rec_seed = derive_seed(seed, counter++);
    auto r = synth_baseline(jittered_packets(cfg, rec_seed), cfg.noise_snr_db, cfg.sample_rate,
                            cfg.duration, rec_seed);
    stamp(r, "test_baseline", i);
    split.test_baseline.push_back(std::move(r));
  }
  for (int i = 0; i < cfg.test_damaged; ++i) {
    const std::uint64_t rec_seed = derive_seed(seed, counter++);
    auto r = synth_damaged(jittered_packets(cfg, rec_seed), cfg.damage, cfg.noise_snr_db,
                           cfg.sample_rate, cfg.duration, rec_seed);
    stamp(r, "test_damaged", i);
    split.test_damaged.push_back(std::move(r));
  }
  return split;
}

void save_dataset(const DatasetSplit& split, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  double sample_rate = 0.0;
  for (const auto* v : {&split.train_baseline, &split.test_baseline, &split.test_damaged})
    if (!v->empty()) sample_rate = v->front().sample_rate;

  std::ofstream man(dir / "manifest");
  if (!man) throw Error("cannot write manifest in " + dir.string());
  man << "version=1\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", sample_rate);
  man << "sample_rate=" << buf << "\n";
  man << "seed=" << split.seed << "\n";
  man << "count_train_baseline=" << split.train_baseline.size() << "\n";
  man << "count_test_baseline=" << split.test_baseline.size() << "\n";
  man << "count_test_damaged=" << split.test_damaged.size() << "\n";
  man.close();

  write_split(dir / "train_baseline.bin", split.train_baseline);
  write_split(dir / "test_baseline.bin", split.test_baseline);
  write_split(dir / "test_damaged.bin", split.test_damaged);
}

DatasetSplit load_dataset(const std::filesystem::path& dir) {
  std::ifstream man(dir / "manifest");
  if (!man) throw Error("missing manifest in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(man, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(FormatFault::malformed_header,
                        "manifest line " + std::to_string(lineno) + " is not key=value");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  for (const char* key : {"version", "sample_rate", "seed", "count_train_baseline",
                          "count_test_baseline", "count_test_damaged"})
    if (!kv.count(key))
      throw FormatError(FormatFault::malformed_header,
                        std::string("manifest missing key '") + key + "'");
  if (kv["version"] != "1")
    throw FormatError(FormatFault::unknown_version,
                      "unsupported dataset version " + kv["version"]);

  DatasetSplit split;
  split.seed = std::stoull(kv["seed"]);
  const double sample_rate = std::stod(kv["sample_rate"]);
  split.train_baseline = read_split(dir / "train_baseline.bin", sample_rate,
                                    std::stoul(kv["count_train_baseline"]));
  split.test_baseline =
      read_split(dir / "test_baseline.bin", sample_rate, std::stoul(kv["count_test_baseline"]));
  split.test_damaged =
      read_split(dir / "test_damaged.bin", sample_rate, std::stoul(kv["count_test_damaged"]));
  return split;
}

} // namespace wavescope
