// SPDX-License-Identifier: Apache-2.0
#include "oransim/link.hpp"

#include <algorithm>
#include <cmath>

#include "oransim/errors.hpp"

namespace oransim::simnet {

const McsTable& McsTable::standard() {
  static const McsTable table = [] {
    McsTable t;
    t.peak_mbps = {0.68, 0.90, 1.10, 1.42, 1.80, 2.22, 2.60, 3.11, 3.50, 4.01,
                   4.39, 4.70, 4.97, 5.74, 6.46, 7.22, 7.74, 7.99, 9.14, 9.91,
                   10.68, 11.45, 12.58, 13.54, 14.11, 15.26, 15.84, 17.00, 18.34};
    for (int m = 0; m <= kMaxMcs; ++m) t.threshold_db[m] = -6.0 + m;
    return t;
  }();
  return table;
}

double McsTable::peak(int mcs) const {
  if (mcs < 0 || mcs > kMaxMcs) throw InvalidArgument("mcs out of range");
  return peak_mbps[mcs];
}

double McsTable::threshold(int mcs) const {
  if (mcs < 0 || mcs > kMaxMcs) throw InvalidArgument("mcs out of range");
  return threshold_db[mcs];
}

double LinkParams::jam_penalty(const JammerProfile& j) const {
  if (!j.on) return 0.0;
  const double slope = (jam_penalty_hi_db - jam_penalty_lo_db) / (jam_gain_hi_db - jam_gain_lo_db);
  return std::max(0.0, jam_penalty_lo_db + slope * (j.gain_db - jam_gain_lo_db));
}

double bler_of(double sinr_db, int mcs, const LinkParams& p, const McsTable& t) {
  return 1.0 / (1.0 + std::exp(p.bler_slope * (sinr_db - t.threshold(mcs))));
}

int adaptive_mcs(double sinr_db, const LinkParams& p, const McsTable& t) {
  int best = 0;
  for (int m = 0; m <= kMaxMcs; ++m) {
    if (t.threshold(m) <= sinr_db - p.adaptive_margin_db) best = m;
  }
  return best;
}

LinkState link_step(const LinkState& state, std::uint64_t dt_ms, const LinkParams& p, std::mt19937_64& rng) {
  if (dt_ms == 0) throw InvalidArgument("dt_ms must be positive");
  LinkState s = state;
  if (s.policy == McsPolicy::kAdaptive) s.mcs = adaptive_mcs(state.sinr_db, p);
  std::normal_distribution<double> noise(0.0, p.noise_sigma_db);
  s.sinr_db = p.base_sinr_db - p.jam_penalty(s.jammer) + noise(rng);
  s.bler = bler_of(s.sinr_db, s.mcs, p);
  s.throughput_mbps = McsTable::standard().peak(s.mcs) * (1.0 - s.bler);
  s.clock_ms += dt_ms;
  return s;
}

LinkState apply_control(const LinkState& state, McsPolicy decision, const LinkParams& p) {
  LinkState s = state;
  s.policy = decision;
  s.mcs = decision == McsPolicy::kFixedMax ? kMaxMcs : adaptive_mcs(state.sinr_db, p);
  return s;
}

}  // namespace oransim::simnet
