// SPDX-License-Identifier: Apache-2.0
#include "oransim/datagen.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>

#include "oransim/errors.hpp"

namespace oransim::datagen {

namespace {

// fftw_plan creation is not thread-safe; execution with new-array execute is.
std::mutex g_plan_mutex;

class Fft {
 public:
  Fft(std::size_t n, int direction) : n_(n) {
    in_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n));
    std::lock_guard lock(g_plan_mutex);
    // ESTIMATE keeps plans (and therefore results) identical across runs.
    plan_ = fftw_plan_dft_1d(static_cast<int>(n), in_, out_, direction, FFTW_ESTIMATE);
  }
  ~Fft() {
    {
      std::lock_guard lock(g_plan_mutex);
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::complex<double>* in() { return reinterpret_cast<std::complex<double>*>(in_); }
  const std::complex<double>* out() const { return reinterpret_cast<const std::complex<double>*>(out_); }
  void run() { fftw_execute(plan_); }
  std::size_t size() const { return n_; }

 private:
  std::size_t n_;
  fftw_complex* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

void put_f32(std::vector<std::uint8_t>& out, float v) {
  auto u = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
}

float get_f32(const std::uint8_t* p) {
  std::uint32_t u = 0;
  for (int i = 0; i < 4; ++i) u |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return std::bit_cast<float>(u);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finaliser over the pair
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// ------------------------------------------------------------------ I/Q

std::vector<std::uint8_t> IqFrame::to_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(samples.size() * 8);
  for (const auto& s : samples) {
    put_f32(out, s.real());
    put_f32(out, s.imag());
  }
  return out;
}

IqFrame IqFrame::from_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() % 8 != 0) throw InvalidArgument("I/Q payload is not a whole number of samples");
  IqFrame f;
  f.samples.resize(bytes.size() / 8);
  for (std::size_t i = 0; i < f.samples.size(); ++i) {
    f.samples[i] = {get_f32(&bytes[8 * i]), get_f32(&bytes[8 * i + 4])};
  }
  return f;
}

IqFrame synth_iq_frame(SignalClass label, const JammerProfile& jammer, std::uint64_t seed, const SignalConfig& cfg) {
  if ((label == SignalClass::kCwi) != jammer.on) {
    throw InvalidArgument("signal label must be CWI exactly when the jammer is on");
  }
  if (cfg.active_subcarriers == 0 || cfg.active_subcarriers % 2 || cfg.active_subcarriers >= cfg.fft_size) {
    throw InvalidArgument("active_subcarriers must be even, positive and below fft_size");
  }
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution bit(0.5);
  const double q = 1.0 / std::numbers::sqrt2;

  Fft ifft(cfg.fft_size, FFTW_BACKWARD);
  const auto n = static_cast<long>(cfg.fft_size);
  const long half = static_cast<long>(cfg.active_subcarriers / 2);
  std::vector<std::complex<double>> x;
  x.reserve(kIqSamples);
  for (std::size_t slot = 0; slot < cfg.slots; ++slot) {
    for (std::size_t sym = 0; sym < cfg.symbols_per_slot; ++sym) {
      std::fill(ifft.in(), ifft.in() + n, std::complex<double>{});
      for (long k = -half; k <= half; ++k) {
        if (k == 0) continue;  // DC left empty
        ifft.in()[(k + n) % n] = {bit(rng) ? q : -q, bit(rng) ? q : -q};
      }
      ifft.run();
      const std::size_t cp = sym == 0 ? cfg.cp_first : cfg.cp_other;
      x.insert(x.end(), ifft.out() + (n - static_cast<long>(cp)), ifft.out() + n);
      x.insert(x.end(), ifft.out(), ifft.out() + n);
    }
  }
  if (x.size() != kIqSamples) throw InvalidArgument("signal config does not produce 76,800 samples");

  double power = 0.0;
  for (const auto& v : x) power += std::norm(v);
  const double scale = 1.0 / std::sqrt(power / static_cast<double>(x.size()));
  const double noise_sd = std::sqrt(std::pow(10.0, -cfg.snr_db / 10.0) / 2.0);
  std::normal_distribution<double> noise(0.0, noise_sd);
  for (auto& v : x) v = v * scale + std::complex<double>(noise(rng), noise(rng));

  if (jammer.on) {
    std::uniform_real_distribution<double> freq(-cfg.tone_max_offset_hz, cfg.tone_max_offset_hz);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double f = freq(rng);
    const double ph = phase(rng);
    const double amp = std::pow(10.0, jammer.gain_db / 20.0) * cfg.tone_ref_scale;
    const double w = 2.0 * std::numbers::pi * f / kSampleRate;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += std::polar(amp, w * static_cast<double>(i) + ph);
  }

  IqFrame frame;
  frame.samples.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    frame.samples[i] = {static_cast<float>(x[i].real()), static_cast<float>(x[i].imag())};
  }
  return frame;
}

// ----------------------------------------------------------- spectrogram

Tensor iq_to_spectrogram(const IqFrame& frame, const SpectrogramConfig& cfg) {
  const std::size_t nfft = cfg.fft_size;
  if (nfft != 2 * kSpecSize || cfg.frames != kSpecSize) {
    throw InvalidArgument("spectrogram config must yield 256 bins by 128 frames");
  }
  if ((cfg.frames - 1) * cfg.hop + nfft > frame.samples.size()) {
    throw InvalidArgument("I/Q frame too short for the spectrogram window");
  }
  Fft fft(nfft, FFTW_FORWARD);
  std::vector<double> window(nfft);
  for (std::size_t i = 0; i < nfft; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(nfft));
  }
  // log[bin][frame], bins fftshifted so index 0 is -fs/2.
  std::vector<double> logmag(nfft * cfg.frames);
  for (std::size_t t = 0; t < cfg.frames; ++t) {
    const auto* src = &frame.samples[t * cfg.hop];
    for (std::size_t i = 0; i < nfft; ++i) {
      fft.in()[i] = std::complex<double>(src[i].real(), src[i].imag()) * window[i];
    }
    fft.run();
    for (std::size_t k = 0; k < nfft; ++k) {
      const std::size_t row = (k + nfft / 2) % nfft;
      logmag[row * cfg.frames + t] = std::log10(std::max(std::abs(fft.out()[k]), cfg.log_floor));
    }
  }
  auto [mn_it, mx_it] = std::minmax_element(logmag.begin(), logmag.end());
  double mn = *mn_it;
  const double mx = *mx_it;
  if (cfg.dynamic_range_decades > 0.0) mn = std::max(mn, mx - cfg.dynamic_range_decades);

  Tensor out(Shape{kSpecSize, kSpecSize, 1});
  if (!(mx > mn)) return out;  // zero-energy or flat frame
  const double span = mx - mn;
  for (std::size_t r = 0; r < kSpecSize; ++r) {
    for (std::size_t t = 0; t < kSpecSize; ++t) {
      const double a = (std::max(logmag[(2 * r) * cfg.frames + t], mn) - mn) / span;
      const double b = (std::max(logmag[(2 * r + 1) * cfg.frames + t], mn) - mn) / span;
      // Halving with bilinear weights averages neighbouring bins.
      out[r * kSpecSize + t] = static_cast<float>(std::clamp(0.5 * (a + b), 0.0, 1.0));
    }
  }
  return out;
}

// ------------------------------------------------------------------ KPM

std::array<double, kKpmFeatures> kpm_features(const KpmSample& s) {
  return {s.ul_sinr_db, s.bitrate_mbps, s.bler, static_cast<double>(s.mcs)};
}

std::array<double, kKpmFeatures> normalize_kpm(const KpmSample& s, const KpmBounds& b) {
  auto f = kpm_features(s);
  for (std::size_t i = 0; i < kKpmFeatures; ++i) f[i] = (f[i] - b.lo[i]) / (b.hi[i] - b.lo[i]);
  return f;
}

KpmSample denormalize_kpm(std::span<const double> v, const KpmBounds& b) {
  if (v.size() != kKpmFeatures) throw InvalidArgument("KPM vector must have 4 features");
  std::array<double, kKpmFeatures> f{};
  for (std::size_t i = 0; i < kKpmFeatures; ++i) f[i] = b.lo[i] + v[i] * (b.hi[i] - b.lo[i]);
  return {f[0], f[1], f[2], static_cast<int>(std::lround(f[3]))};
}

Tensor gen_kpm_window(std::span<const KpmSample> history, std::size_t t, const KpmBounds& bounds) {
  if (t == 0) throw InvalidArgument("window length t must be >= 1");
  if (history.size() < t) {
    throw InvalidArgument("KPM history holds " + std::to_string(history.size()) + " reports, window needs " +
                          std::to_string(t));
  }
  Tensor w(Shape{t * kKpmFeatures});
  const std::size_t first = history.size() - t;
  for (std::size_t i = 0; i < t; ++i) {
    auto f = normalize_kpm(history[first + i], bounds);
    for (std::size_t j = 0; j < kKpmFeatures; ++j) w[i * kKpmFeatures + j] = std::clamp(f[j], 0.0, 1.0);
  }
  return w;
}

std::vector<KpmSample> synth_kpm_trace(SignalClass label, std::uint64_t seed, const KpmTraceConfig& cfg) {
  if (cfg.t == 0) throw InvalidArgument("trace length must be >= 1");
  std::mt19937_64 rng(seed);
  simnet::LinkParams link = cfg.link;
  link.base_sinr_db = std::uniform_real_distribution<double>(cfg.base_sinr_lo_db, cfg.base_sinr_hi_db)(rng);
  simnet::LinkState state;
  state.sinr_db = link.base_sinr_db;
  if (cfg.collection == KpmCollection::kFixedMcs) {
    state.mcs = cfg.collection_mcs;
    state.policy = simnet::McsPolicy::kFixedMax;  // pinned, no adaptation
  } else if (cfg.collection == KpmCollection::kRandomMcs) {
    state.mcs = std::uniform_int_distribution<int>(0, simnet::kMaxMcs)(rng);
    state.policy = simnet::McsPolicy::kFixedMax;
  } else {
    const bool adaptive = std::bernoulli_distribution(0.5)(rng);
    state.policy = adaptive ? simnet::McsPolicy::kAdaptive : simnet::McsPolicy::kFixedMax;
    state.mcs = simnet::kMaxMcs;
  }
  if (label == SignalClass::kCwi) {
    state.jammer.on = true;
    state.jammer.gain_db = std::uniform_real_distribution<double>(cfg.gain_lo_db, cfg.gain_hi_db)(rng);
  }
  std::vector<KpmSample> out;
  out.reserve(cfg.t);
  for (std::size_t i = 0; i < cfg.t; ++i) {
    state = simnet::link_step(state, cfg.report_interval_ms, link, rng);
    out.push_back(state.kpm());
  }
  return out;
}

// -------------------------------------------------------------- datasets

std::string to_string(DatasetKind kind) { return kind == DatasetKind::kSpectrogram ? "spectrogram" : "kpm"; }

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "spectrogram" || s == "spec") return DatasetKind::kSpectrogram;
  if (s == "kpm") return DatasetKind::kKpm;
  throw InvalidArgument("unknown dataset kind '" + s + "'");
}

DatasetCounts default_counts(DatasetKind kind) {
  return kind == DatasetKind::kSpectrogram ? DatasetCounts{2000, 2000} : DatasetCounts{6000, 4000};
}

DatasetCounts full_counts(DatasetKind kind) {
  return kind == DatasetKind::kSpectrogram ? DatasetCounts{5000, 5000} : DatasetCounts{15032, 10254};
}

namespace {

Tensor make_sample(DatasetKind kind, SignalClass label, std::uint64_t seed, const DatasetOptions& opt) {
  if (kind == DatasetKind::kSpectrogram) {
    JammerProfile j;
    j.on = label == SignalClass::kCwi;
    std::mt19937_64 rng(seed ^ 0x6a09e667f3bcc909ULL);
    j.gain_db = std::uniform_real_distribution<double>(opt.jam_gain_lo_db, opt.jam_gain_hi_db)(rng);
    return iq_to_spectrogram(synth_iq_frame(label, j, seed, opt.signal), opt.spectrogram);
  }
  auto trace = synth_kpm_trace(label, seed, opt.kpm);
  Tensor w = gen_kpm_window(trace, opt.kpm.t, opt.bounds);
  for (auto& v : w.data()) v = static_cast<float>(v);  // stored precision
  return w;
}

}  // namespace

Dataset build_dataset(DatasetKind kind, DatasetCounts counts, std::uint64_t seed, const DatasetOptions& opt) {
  if (counts.soi == 0 || counts.cwi == 0) throw InvalidArgument("each class needs at least one sample");
  Dataset ds;
  ds.kind = kind;
  ds.seed = seed;
  ds.counts = counts;
  ds.bounds = opt.bounds;
  const std::size_t total = counts.soi + counts.cwi;
  std::size_t soi = 0, cwi = 0;
  for (std::size_t i = 0; i < total; ++i) {
    // Interleave in proportion so any prefix is roughly balanced.
    const bool pick_cwi = soi == counts.soi || (cwi < counts.cwi && cwi * counts.soi < soi * counts.cwi);
    const SignalClass label = pick_cwi ? SignalClass::kCwi : SignalClass::kSoi;
    (pick_cwi ? cwi : soi)++;
    ds.samples.push_back(make_sample(kind, label, mix_seed(seed, i), opt), static_cast<std::size_t>(label));
  }
  return ds;
}

namespace {

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void write_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create dataset directory", dir.string());
  const Shape shape = ds.samples.empty() ? Shape{} : ds.samples.inputs.front().shape();

  std::ofstream samples(dir / "samples.f32", std::ios::binary | std::ios::trunc);
  if (!samples) throw IoError("cannot open for writing", (dir / "samples.f32").string());
  std::vector<std::uint8_t> buf;
  for (const auto& x : ds.samples.inputs) {
    if (x.shape() != shape) throw InvalidArgument("dataset samples differ in shape");
    buf.clear();
    for (double v : x.data()) put_f32(buf, static_cast<float>(v));
    samples.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  if (!samples) throw IoError("short write", (dir / "samples.f32").string());

  std::ofstream labels(dir / "labels.u8", std::ios::binary | std::ios::trunc);
  if (!labels) throw IoError("cannot open for writing", (dir / "labels.u8").string());
  for (auto y : ds.samples.labels) labels.put(static_cast<char>(y));
  if (!labels) throw IoError("short write", (dir / "labels.u8").string());

  std::ofstream m(dir / "manifest.txt", std::ios::trunc);
  if (!m) throw IoError("cannot open for writing", (dir / "manifest.txt").string());
  m << "format=oransim-dataset-1\n";
  m << "kind=" << to_string(ds.kind) << "\n";
  m << "seed=" << ds.seed << "\n";
  m << "count.soi=" << ds.counts.soi << "\n";
  m << "count.cwi=" << ds.counts.cwi << "\n";
  m << "count.total=" << ds.samples.size() << "\n";
  m << "sample.shape=" << shape_to_string(shape) << "\n";
  m << "sample.dtype=float32le\n";
  m << "label.dtype=u8\n";
  m << "label.0=" << (ds.kind == DatasetKind::kSpectrogram ? "SOI" : "clean") << "\n";
  m << "label.1=" << (ds.kind == DatasetKind::kSpectrogram ? "CWI" : "jammed") << "\n";
  static const char* names[kKpmFeatures] = {"ul_sinr_db", "bitrate_mbps", "bler", "mcs"};
  for (std::size_t i = 0; i < kKpmFeatures; ++i) {
    m << "norm." << names[i] << ".min=" << fmt_double(ds.bounds.lo[i]) << "\n";
    m << "norm." << names[i] << ".max=" << fmt_double(ds.bounds.hi[i]) << "\n";
  }
  if (!m) throw IoError("short write", (dir / "manifest.txt").string());
}

std::map<std::string, std::string> read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("cannot open dataset manifest", (dir / "manifest.txt").string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("malformed manifest line '" + line + "'", dir.string());
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

namespace {

Shape parse_shape(const std::string& s) {
  Shape out;
  std::string body = s;
  std::erase(body, '(');
  std::erase(body, ')');
  std::stringstream ss(body);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoul(tok));
  return out;
}

const std::string& need(const std::map<std::string, std::string>& kv, const std::string& key,
                        const std::filesystem::path& dir) {
  auto it = kv.find(key);
  if (it == kv.end()) throw IoError("manifest lacks key '" + key + "'", dir.string());
  return it->second;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& dir) {
  auto kv = read_manifest(dir);
  Dataset ds;
  try {
    ds.kind = dataset_kind_from_string(need(kv, "kind", dir));
    ds.seed = std::stoull(need(kv, "seed", dir));
    ds.counts = {std::stoul(need(kv, "count.soi", dir)), std::stoul(need(kv, "count.cwi", dir))};
    static const char* names[kKpmFeatures] = {"ul_sinr_db", "bitrate_mbps", "bler", "mcs"};
    for (std::size_t i = 0; i < kKpmFeatures; ++i) {
      ds.bounds.lo[i] = std::stod(need(kv, std::string("norm.") + names[i] + ".min", dir));
      ds.bounds.hi[i] = std::stod(need(kv, std::string("norm.") + names[i] + ".max", dir));
    }
  } catch (const std::logic_error& e) {
    throw IoError(std::string("malformed manifest value: ") + e.what(), dir.string());
  }
  const Shape shape = parse_shape(need(kv, "sample.shape", dir));
  const std::size_t total = std::stoul(need(kv, "count.total", dir));
  const std::size_t vol = shape_volume(shape);

  std::ifstream labels(dir / "labels.u8", std::ios::binary);
  if (!labels) throw IoError("cannot open", (dir / "labels.u8").string());
  std::vector<char> lab(total);
  labels.read(lab.data(), static_cast<std::streamsize>(total));
  if (labels.gcount() != static_cast<std::streamsize>(total)) throw IoError("truncated labels", dir.string());

  std::ifstream samples(dir / "samples.f32", std::ios::binary);
  if (!samples) throw IoError("cannot open", (dir / "samples.f32").string());
  std::vector<std::uint8_t> buf(vol * 4);
  for (std::size_t i = 0; i < total; ++i) {
    samples.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (samples.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw IoError("truncated samples", (dir / "samples.f32").string());
    }
    Tensor x(shape);
    for (std::size_t k = 0; k < vol; ++k) x[k] = get_f32(&buf[4 * k]);
    ds.samples.push_back(std::move(x), static_cast<std::uint8_t>(lab[i]));
  }
  return ds;
}

Split stratified_split(const nn::LabeledSet& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train_fraction must lie in (0, 1)");
  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data.labels[i]].push_back(i);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (auto& [label, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + static_cast<long>(n_train));
    test_idx.insert(test_idx.end(), idx.begin() + static_cast<long>(n_train), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  Split s;
  for (auto i : train_idx) s.train.push_back(data.inputs[i], data.labels[i]);
  for (auto i : test_idx) s.test.push_back(data.inputs[i], data.labels[i]);
  return s;
}

}  // namespace oransim::datagen
