// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "oransim/link.hpp"
#include "oransim/nn.hpp"

namespace oransim::datagen {

using simnet::JammerProfile;
using simnet::KpmSample;

enum class SignalClass : std::uint8_t { kSoi = 0, kCwi = 1 };

// ------------------------------------------------------------------ I/Q

inline constexpr std::size_t kIqSamples = 76800;
inline constexpr std::size_t kIqBytes = kIqSamples * 8;
inline constexpr double kSampleRate = 7.68e6;

struct IqFrame {
  std::vector<std::complex<float>> samples;
  double sample_rate = kSampleRate;
  double carrier_hz = 2.56e9;  // metadata only

  // Interleaved little-endian float32 I/Q.
  std::vector<std::uint8_t> to_bytes() const;
  static IqFrame from_bytes(std::span<const std::uint8_t> bytes);
};

struct SignalConfig {
  double snr_db = 20.0;
  std::size_t fft_size = 512;
  std::size_t active_subcarriers = 300;  // 25 PRBs
  std::size_t slots = 20;
  std::size_t symbols_per_slot = 7;
  std::size_t cp_first = 40;
  std::size_t cp_other = 36;
  double tone_max_offset_hz = 2.25e6;
  // Tone amplitude is 10^(gain_db / 20) * tone_ref_scale relative to a
  // unit-power SOI.
  double tone_ref_scale = 0.1;
};

IqFrame synth_iq_frame(SignalClass label, const JammerProfile& jammer, std::uint64_t seed,
                       const SignalConfig& cfg = {});

// ----------------------------------------------------------- spectrogram

inline constexpr std::size_t kSpecSize = 128;

struct SpectrogramConfig {
  std::size_t fft_size = 256;
  std::size_t hop = 600;
  std::size_t frames = 128;
  double log_floor = 1e-12;
  // Clamp log10 magnitudes to max - N decades before normalising; 0 disables.
  double dynamic_range_decades = 2.0;
};

/// (128, 128, 1) tensor: rows are frequency (lowest first), columns are time,
/// values in [0, 1] and representable in float32.
Tensor iq_to_spectrogram(const IqFrame& frame, const SpectrogramConfig& cfg = {});

// ------------------------------------------------------------------ KPM

inline constexpr std::size_t kKpmFeatures = 4;

struct KpmBounds {
  std::array<double, kKpmFeatures> lo{-60.0, 0.0, 0.0, 0.0};
  std::array<double, kKpmFeatures> hi{60.0, 20.0, 1.0, 28.0};
};

std::array<double, kKpmFeatures> kpm_features(const KpmSample& s);
std::array<double, kKpmFeatures> normalize_kpm(const KpmSample& s, const KpmBounds& b);
KpmSample denormalize_kpm(std::span<const double> v, const KpmBounds& b);

/// Stacks the last t samples of `history` (oldest first), each normalised
/// and clamped to [0, 1]. Throws InvalidArgument when history is shorter than t.
Tensor gen_kpm_window(std::span<const KpmSample> history, std::size_t t, const KpmBounds& bounds);

// How the link picks its MCS while a trace is recorded: pinned at
// collection_mcs, pinned at a per-trace random MCS, or FIXED_MAX / ADAPTIVE
// drawn per trace (the two policies the closed loop can apply).
enum class KpmCollection : std::uint8_t { kFixedMcs, kRandomMcs, kLoopPolicies };

struct KpmTraceConfig {
  std::size_t t = 15;
  KpmCollection collection = KpmCollection::kFixedMcs;
  int collection_mcs = 1;  // kFixedMcs only
  double base_sinr_lo_db = 22.0;
  double base_sinr_hi_db = 28.0;
  double gain_lo_db = 30.0;
  double gain_hi_db = 40.0;
  std::uint64_t report_interval_ms = 1000;
  simnet::LinkParams link;
};

/// Simulates t reports of one link, jammed or clean.
std::vector<KpmSample> synth_kpm_trace(SignalClass label, std::uint64_t seed, const KpmTraceConfig& cfg = {});

// -------------------------------------------------------------- datasets

enum class DatasetKind : std::uint8_t { kSpectrogram, kKpm };
std::string to_string(DatasetKind kind);
DatasetKind dataset_kind_from_string(const std::string& s);

struct DatasetCounts {
  std::size_t soi = 0;
  std::size_t cwi = 0;
};

DatasetCounts default_counts(DatasetKind kind);
DatasetCounts full_counts(DatasetKind kind);

struct DatasetOptions {
  SignalConfig signal;
  SpectrogramConfig spectrogram;
  KpmTraceConfig kpm;
  KpmBounds bounds;
  // Jammer gain range for spectrogram samples.
  double jam_gain_lo_db = 30.0;
  double jam_gain_hi_db = 40.0;
};

struct Dataset {
  DatasetKind kind = DatasetKind::kSpectrogram;
  std::uint64_t seed = 0;
  DatasetCounts counts;
  KpmBounds bounds;
  nn::LabeledSet samples;  // labels: 0 = SOI / clean, 1 = CWI / jammed
};

/// Interleaves classes deterministically; sample i uses seed hash(seed, i).
Dataset build_dataset(DatasetKind kind, DatasetCounts counts, std::uint64_t seed, const DatasetOptions& opt = {});

/// Writes manifest.txt (key=value), samples.f32 (little-endian float32,
/// row-major per sample) and labels.u8 into `dir`, creating it if needed.
void write_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);
std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir);

struct Split {
  nn::LabeledSet train;
  nn::LabeledSet test;
};

/// Stratified, seeded split; `train_fraction` of each class goes to train.
Split stratified_split(const nn::LabeledSet& data, double train_fraction, std::uint64_t seed);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace oransim::datagen
