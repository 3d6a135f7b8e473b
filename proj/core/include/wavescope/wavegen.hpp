#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "wavescope/errors.hpp"

namespace wavescope {

enum class Label : std::uint8_t { baseline = 0, damaged = 1, unlabeled = 2 };

const char* label_name(Label l);
Label label_from_name(const std::string& name);

/// One sensed waveform plus bookkeeping metadata.
struct TimeSeriesRecord {
  std::vector<double> samples;
  double sample_rate = 0.0; // Hz
  Label label = Label::unlabeled;
  std::map<std::string, std::string> meta;

  bool operator==(const TimeSeriesRecord&) const = default;
};

enum class ModeTag : std::uint8_t { s0 = 0, a0 = 1, reflection = 2 };

/// One windowed toneburst inside a synthetic signal. `arrival_time` is the
/// envelope-peak time; the burst occupies arrival_time +/- cycles/(2*center_freq).
struct WavePacketSpec {
  double cycles = 5.0;
  double center_freq = 60e3; // Hz
  double arrival_time = 0.0; // s
  double amplitude = 1.0;
  ModeTag mode = ModeTag::a0;
};

/// Observable damage signature: packets lose amplitude and arrive later.
/// An empty `applies_to` means every packet is affected.
struct DamageTransform {
  double amplitude_factor = 1.0; // in (0, 1]
  double phase_delay = 0.0;      // s, >= 0
  std::vector<ModeTag> applies_to;

  bool applies(ModeTag tag) const;
};

struct DatasetSplit {
  std::vector<TimeSeriesRecord> train_baseline;
  std::vector<TimeSeriesRecord> test_baseline;
  std::vector<TimeSeriesRecord> test_damaged;
  std::uint64_t seed = 0;
};

/// Synthetic-corpus generation settings. Defaults are the desk-scale preset:
/// 2 MHz sampling, 5 ms traces, a dominant dispersed A0 burst at 0.2 ms and a
/// smaller boundary reflection at 3.5 ms, 30 dB baseline noise, damage on the
/// A0 path.
///
/// Per-record measurement variability (each draw truncated at 2 sigma,
/// seeded from the record seed) mimics repeat experiments; without it every
/// synthetic baseline collapses onto one scalogram and the benchmark
/// degenerates:
///  - velocity_jitter_std: common relative wave-speed drift per record (the
///    temperature effect); arrival times scale by (1 + delta), so late
///    reflections wander far more than early arrivals.
///  - arrival_jitter_std: independent per-packet trigger jitter, seconds.
///  - amplitude_jitter_std: independent per-packet relative coupling jitter.
struct GenerationConfig {
  std::vector<WavePacketSpec> packets{
      {12.0, 60e3, 0.2e-3, 1.0, ModeTag::a0},
      {12.0, 60e3, 3.5e-3, 0.5, ModeTag::reflection},
  };
  DamageTransform damage{0.7, 10e-6, {ModeTag::a0}};
  double sample_rate = 2e6; // Hz
  double duration = 5e-3;   // s
  double noise_snr_db = 30.0;
  double velocity_jitter_std = 0.03;  // relative, common per record
  double arrival_jitter_std = 2e-6;   // s, per packet per record
  double amplitude_jitter_std = 0.02; // relative, per packet per record
  /// Extra training copies per listed SNR (dB): each train_baseline record is
  /// re-noised at that level and appended to the training split.
  std::vector<double> augment_snrs_db{};
  int train_baseline = 200;
  int test_baseline = 100;
  int test_damaged = 100;
};

/// Hann-windowed sine burst of `cycles` cycles centered in a `duration`-long
/// record; exactly zero outside the burst window.
/// Requires sample_rate >= 10 * center_freq and duration >= cycles/center_freq.
TimeSeriesRecord make_toneburst(double cycles, double center_freq, double amplitude,
                                double sample_rate, double duration);

/// Superposition of the packets plus white Gaussian noise at `noise_snr_db`
/// relative to the clean superposition energy. snr = +inf means noise-free.
/// Pure function of (packets, seed).
TimeSeriesRecord synth_baseline(const std::vector<WavePacketSpec>& packets, double noise_snr_db,
                                double sample_rate, double duration, std::uint64_t seed);

/// Baseline synthesis with the damage transform applied to matching packets
/// before rendering. The noise level is anchored to the *undamaged* signal
/// energy: the sensor noise floor does not know about the damage, so damaged
/// records see the same absolute noise as their baseline counterparts.
TimeSeriesRecord synth_damaged(const std::vector<WavePacketSpec>& packets,
                               const DamageTransform& dmg, double noise_snr_db,
                               double sample_rate, double duration, std::uint64_t seed);

/// Adds white Gaussian noise scaled so the empirical SNR hits `snr_db`
/// exactly (vs. the input record's energy). snr = +inf returns a copy.
TimeSeriesRecord augment_noise(const TimeSeriesRecord& rec, double snr_db, std::uint64_t seed);

/// Builds the full split. Per-record seeds derive from `seed` via a
/// splittable counter: record k of the whole set gets derive_seed(seed, k),
/// counting train_baseline, then test_baseline, then test_damaged.
DatasetSplit build_dataset(const GenerationConfig& cfg, std::uint64_t seed);

double signal_energy(const std::vector<double>& samples);

/// On-disk dataset: a directory holding `manifest` (key=value text) plus one
/// little-endian binary file per split (see README for the byte layout).
void save_dataset(const DatasetSplit& split, const std::filesystem::path& dir);
DatasetSplit load_dataset(const std::filesystem::path& dir);

} // namespace wavescope
