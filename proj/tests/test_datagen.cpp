// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "oransim/datagen.hpp"
#include "oransim/errors.hpp"

using namespace oransim;
using namespace oransim::datagen;

namespace {

JammerProfile jam(double gain) { return {gain, true}; }
JammerProfile off() { return {}; }

double mean_power(const IqFrame& f) {
  double s = 0;
  for (auto v : f.samples) s += std::norm(std::complex<double>(v));
  return s / static_cast<double>(f.samples.size());
}

std::vector<double> row_means(const Tensor& spec) {
  std::vector<double> rows(kSpecSize, 0.0);
  for (std::size_t r = 0; r < kSpecSize; ++r) {
    for (std::size_t c = 0; c < kSpecSize; ++c) rows[r] += spec[r * kSpecSize + c];
    rows[r] /= kSpecSize;
  }
  return rows;
}

double median(std::vector<double> v) {
  std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
  return v[v.size() / 2];
}

// Direct O(N^2) DFT spectrogram with the same windowing, scaling and resize.
Tensor naive_spectrogram(const IqFrame& f, double decades) {
  const std::size_t n = 256, hop = 600, frames = 128;
  std::vector<double> lm(n * frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t k = 0; k < n; ++k) {
      std::complex<double> acc{};
      for (std::size_t i = 0; i < n; ++i) {
        double w = 0.5 - 0.5 * std::cos(2 * std::numbers::pi * i / n);
        double ang = -2 * std::numbers::pi * static_cast<double>(k * i) / n;
        acc += std::complex<double>(f.samples[t * hop + i]) * w * std::polar(1.0, ang);
      }
      std::size_t row = (k + n / 2) % n;
      lm[row * frames + t] = std::log10(std::max(std::abs(acc), 1e-12));
    }
  }
  double mn = *std::min_element(lm.begin(), lm.end()), mx = *std::max_element(lm.begin(), lm.end());
  if (decades > 0) {
    mn = std::max(mn, mx - decades);
    for (auto& v : lm) v = std::max(v, mn);
  }
  Tensor out(Shape{128, 128, 1});
  for (std::size_t r = 0; r < 128; ++r)
    for (std::size_t t = 0; t < 128; ++t)
      out[r * 128 + t] = 0.5 * ((lm[2 * r * frames + t] - mn) + (lm[(2 * r + 1) * frames + t] - mn)) / (mx - mn);
  return out;
}

}  // namespace

TEST(IqFrame, ExactSampleCountAndBytes) {
  for (std::uint64_t seed : {0ull, 1ull, 12345ull}) {
    auto f = synth_iq_frame(SignalClass::kSoi, off(), seed);
    EXPECT_EQ(f.samples.size(), 76800u);
    EXPECT_EQ(f.to_bytes().size(), 614400u);
  }
}

TEST(IqFrame, DeterministicPerSeed) {
  auto a = synth_iq_frame(SignalClass::kSoi, off(), 9);
  auto b = synth_iq_frame(SignalClass::kSoi, off(), 9);
  auto c = synth_iq_frame(SignalClass::kSoi, off(), 10);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
}

TEST(IqFrame, BytesRoundTrip) {
  auto f = synth_iq_frame(SignalClass::kCwi, jam(35), 4);
  auto back = IqFrame::from_bytes(f.to_bytes());
  EXPECT_EQ(back.samples, f.samples);
  std::vector<std::uint8_t> odd(7);
  EXPECT_THROW(IqFrame::from_bytes(odd), InvalidArgument);
}

TEST(IqFrame, SoiHasUnitPowerPlusNoise) {
  auto f = synth_iq_frame(SignalClass::kSoi, off(), 3);
  EXPECT_NEAR(mean_power(f), 1.01, 0.01);
}

TEST(IqFrame, JammerPowerRatioAt40dB) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto soi = synth_iq_frame(SignalClass::kSoi, off(), seed);
    auto cwi = synth_iq_frame(SignalClass::kCwi, jam(40), seed);
    EXPECT_GT(mean_power(cwi) / mean_power(soi), 10.0);
  }
}

TEST(IqFrame, LabelMustMatchJammer) {
  EXPECT_THROW(synth_iq_frame(SignalClass::kCwi, off(), 0), InvalidArgument);
  EXPECT_THROW(synth_iq_frame(SignalClass::kSoi, jam(30), 0), InvalidArgument);
}

TEST(Spectrogram, ShapeAndBoundsOverRandomFrames) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    IqFrame f;
    f.samples.resize(kIqSamples);
    std::normal_distribution<float> g(0.0f, std::uniform_real_distribution<float>(0.01f, 10.0f)(rng));
    // Mix of white noise, synthesised frames would cost too long here.
    for (auto& s : f.samples) s = {g(rng), g(rng)};
    Tensor s = iq_to_spectrogram(f);
    ASSERT_EQ(s.shape(), (Shape{128, 128, 1}));
    auto [mn, mx] = std::minmax_element(s.data().begin(), s.data().end());
    ASSERT_GE(*mn, 0.0);
    ASSERT_LE(*mx, 1.0);
  }
}

TEST(Spectrogram, ZeroFrameIsAllZero) {
  IqFrame f;
  f.samples.assign(kIqSamples, {0.0f, 0.0f});
  Tensor s = iq_to_spectrogram(f);
  for (double v : s.data()) ASSERT_EQ(v, 0.0);
}

TEST(Spectrogram, MatchesDirectDft) {
  auto f = synth_iq_frame(SignalClass::kCwi, jam(37), 21);
  for (double decades : {0.0, 2.0}) {
    SpectrogramConfig cfg;
    cfg.dynamic_range_decades = decades;
    Tensor fast = iq_to_spectrogram(f, cfg);
    Tensor slow = naive_spectrogram(f, decades);
    EXPECT_LT(max_abs_diff(fast, slow), 1e-6) << decades;  // float32 storage of pixels
  }
}

TEST(Spectrogram, CwiShowsToneRidge) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto rows = row_means(iq_to_spectrogram(synth_iq_frame(SignalClass::kCwi, jam(40), seed)));
    EXPECT_GT(*std::max_element(rows.begin(), rows.end()), 3.0 * median(rows)) << "seed " << seed;
  }
}

TEST(Spectrogram, RidgeSitsAtToneFrequency) {
  // A bare tone at +1 MHz lands in row floor((f / fs * 256 + 128) / 2).
  IqFrame f;
  f.samples.resize(kIqSamples);
  const double freq = 1.0e6;
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    auto v = std::polar(1.0, 2 * std::numbers::pi * freq / kSampleRate * static_cast<double>(i));
    f.samples[i] = {static_cast<float>(v.real()), static_cast<float>(v.imag())};
  }
  auto rows = row_means(iq_to_spectrogram(f));
  auto peak = static_cast<std::size_t>(std::max_element(rows.begin(), rows.end()) - rows.begin());
  EXPECT_EQ(peak, static_cast<std::size_t>((freq / kSampleRate * 256 + 128) / 2));
}

TEST(Kpm, WindowLengths) {
  auto trace = synth_kpm_trace(SignalClass::kSoi, 1);
  ASSERT_EQ(trace.size(), 15u);
  EXPECT_EQ(gen_kpm_window(trace, 15, KpmBounds{}).size(), 60u);
  EXPECT_EQ(gen_kpm_window(trace, 1, KpmBounds{}).size(), 4u);
  EXPECT_THROW(gen_kpm_window(std::span(trace).first(3), 4, KpmBounds{}), InvalidArgument);
}

TEST(Kpm, WindowEntriesNormalised) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    for (auto label : {SignalClass::kSoi, SignalClass::kCwi}) {
      auto w = gen_kpm_window(synth_kpm_trace(label, seed), 15, KpmBounds{});
      for (double v : w.data()) {
        ASSERT_GE(v, 0.0);
        ASSERT_LE(v, 1.0);
      }
    }
  }
}

TEST(Kpm, JammedWindowsHaveLowerSinr) {
  auto sinr_mean = [](const Tensor& w) {
    double s = 0;
    for (std::size_t i = 0; i < w.size(); i += kKpmFeatures) s += w[i];
    return s / (w.size() / kKpmFeatures);
  };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto clean = gen_kpm_window(synth_kpm_trace(SignalClass::kSoi, seed), 15, KpmBounds{});
    auto jammed = gen_kpm_window(synth_kpm_trace(SignalClass::kCwi, seed), 15, KpmBounds{});
    ASSERT_LT(sinr_mean(jammed), sinr_mean(clean)) << "seed " << seed;
  }
}

TEST(Kpm, NormalisationRoundTrip) {
  KpmBounds b;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 1000; ++i) {
    KpmSample s{-60 + 120 * u(rng), 20 * u(rng), u(rng), static_cast<int>(29 * u(rng)) % 29};
    auto n = normalize_kpm(s, b);
    auto back = denormalize_kpm(n, b);
    ASSERT_NEAR(back.ul_sinr_db, s.ul_sinr_db, 1e-9);
    ASSERT_NEAR(back.bitrate_mbps, s.bitrate_mbps, 1e-9);
    ASSERT_NEAR(back.bler, s.bler, 1e-9);
    ASSERT_EQ(back.mcs, s.mcs);
  }
}

TEST(Dataset, FullScaleCounts) {
  EXPECT_EQ(full_counts(DatasetKind::kSpectrogram).soi, 5000u);
  EXPECT_EQ(full_counts(DatasetKind::kSpectrogram).cwi, 5000u);
  EXPECT_EQ(full_counts(DatasetKind::kKpm).soi, 15032u);
  EXPECT_EQ(full_counts(DatasetKind::kKpm).cwi, 10254u);
  EXPECT_EQ(default_counts(DatasetKind::kKpm).soi, 6000u);
  EXPECT_EQ(default_counts(DatasetKind::kKpm).cwi, 4000u);
}

TEST(Dataset, ManifestRecordsFullScaleKpmCounts) {
  auto dir = std::filesystem::temp_directory_path() / "oransim_kpm_full";
  auto ds = build_dataset(DatasetKind::kKpm, full_counts(DatasetKind::kKpm), 5);
  write_dataset(ds, dir);
  auto kv = read_manifest(dir);
  EXPECT_EQ(kv["count.soi"], "15032");
  EXPECT_EQ(kv["count.cwi"], "10254");
  std::filesystem::remove_all(dir);
}

TEST(Dataset, RebuildIsByteIdenticalAndLoads) {
  auto d1 = std::filesystem::temp_directory_path() / "oransim_ds_a";
  auto d2 = std::filesystem::temp_directory_path() / "oransim_ds_b";
  for (auto kind : {DatasetKind::kKpm, DatasetKind::kSpectrogram}) {
    DatasetCounts c{6, 4};
    write_dataset(build_dataset(kind, c, 77), d1);
    write_dataset(build_dataset(kind, c, 77), d2);
    for (const char* name : {"samples.f32", "labels.u8", "manifest.txt"}) {
      std::ifstream a(d1 / name, std::ios::binary), b(d2 / name, std::ios::binary);
      std::string sa((std::istreambuf_iterator<char>(a)), {}), sb((std::istreambuf_iterator<char>(b)), {});
      EXPECT_FALSE(sa.empty());
      EXPECT_EQ(sa, sb) << name;
    }
    auto loaded = load_dataset(d1);
    auto built = build_dataset(kind, c, 77);
    EXPECT_EQ(loaded.kind, kind);
    ASSERT_EQ(loaded.samples.size(), 10u);
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_EQ(loaded.samples.inputs[i], built.samples.inputs[i]);
      EXPECT_EQ(loaded.samples.labels[i], built.samples.labels[i]);
    }
    std::size_t cwi = std::count(loaded.samples.labels.begin(), loaded.samples.labels.end(), 1u);
    EXPECT_EQ(cwi, 4u);
    if (kind == DatasetKind::kSpectrogram) {
      for (const auto& x : loaded.samples.inputs) {
        EXPECT_EQ(x.shape(), (Shape{128, 128, 1}));
        for (double v : x.data()) ASSERT_TRUE(v >= 0.0 && v <= 1.0);
      }
    }
  }
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST(Dataset, IoErrorsCarryPath) {
  try {
    load_dataset("/nonexistent/oransim");
    FAIL();
  } catch (const IoError& e) {
    EXPECT_NE(e.path().find("/nonexistent/oransim"), std::string::npos);
  }
  EXPECT_THROW(build_dataset(DatasetKind::kKpm, {0, 3}, 1), InvalidArgument);
}

TEST(Split, StratifiedEightyTwenty) {
  auto ds = build_dataset(DatasetKind::kKpm, {60, 40}, 3);
  auto s = stratified_split(ds.samples, 0.8, 1);
  EXPECT_EQ(s.train.size(), 80u);
  EXPECT_EQ(s.test.size(), 20u);
  EXPECT_EQ(std::count(s.test.labels.begin(), s.test.labels.end(), 1u), 8);
  auto again = stratified_split(ds.samples, 0.8, 1);
  EXPECT_EQ(again.test.labels, s.test.labels);
}
