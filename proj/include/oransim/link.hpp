// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>

namespace oransim::simnet {

inline constexpr int kMaxMcs = 28;

// Per-MCS peak uplink rate at 25 PRBs and the SINR at which BLER crosses 50%.
struct McsTable {
  std::array<double, kMaxMcs + 1> peak_mbps{};
  std::array<double, kMaxMcs + 1> threshold_db{};

  static const McsTable& standard();
  double peak(int mcs) const;
  double threshold(int mcs) const;
};

struct JammerProfile {
  double gain_db = 40.0;
  bool on = false;
};

// Link calibration. All constants are simulator choices, not measurements.
struct LinkParams {
  double base_sinr_db = 25.0;
  double noise_sigma_db = 1.5;
  double bler_slope = 1.2;          // k in 1 / (1 + exp(k (sinr - thr)))
  double adaptive_margin_db = 3.0;
  double jam_gain_lo_db = 30.0;     // penalty(lo) = jam_penalty_lo_db
  double jam_gain_hi_db = 40.0;     // penalty(hi) = jam_penalty_hi_db
  double jam_penalty_lo_db = 17.0;
  double jam_penalty_hi_db = 27.0;

  double jam_penalty(const JammerProfile& j) const;
};

enum class McsPolicy : std::uint8_t { kFixedMax = 0, kAdaptive = 1 };

struct KpmSample {
  double ul_sinr_db = 0.0;
  double bitrate_mbps = 0.0;
  double bler = 0.0;
  int mcs = 0;
  bool operator==(const KpmSample&) const = default;
};

struct LinkState {
  double sinr_db = 25.0;
  int mcs = kMaxMcs;
  double bler = 0.0;
  double throughput_mbps = 0.0;
  JammerProfile jammer;
  std::uint64_t clock_ms = 0;
  McsPolicy policy = McsPolicy::kFixedMax;

  KpmSample kpm() const { return {sinr_db, throughput_mbps, bler, mcs}; }
};

double bler_of(double sinr_db, int mcs, const LinkParams& p, const McsTable& t = McsTable::standard());
int adaptive_mcs(double sinr_db, const LinkParams& p, const McsTable& t = McsTable::standard());

/// Advances the link by dt_ms: draws a new SINR sample, re-evaluates BLER and
/// throughput for the current MCS. The adaptive policy re-selects the MCS
/// from the previous tick's SINR (link adaptation lags by one tick).
LinkState link_step(const LinkState& state, std::uint64_t dt_ms, const LinkParams& p, std::mt19937_64& rng);

/// FIXED_MAX pins MCS 28; ADAPTIVE picks the largest MCS whose threshold is at
/// most sinr - margin (floor 0).
LinkState apply_control(const LinkState& state, McsPolicy decision, const LinkParams& p);

}  // namespace oransim::simnet
