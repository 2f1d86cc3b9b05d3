// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "oransim/attacks.hpp"
#include "oransim/datagen.hpp"
#include "oransim/link.hpp"
#include "oransim/ric.hpp"
#include "oransim/xapps.hpp"

namespace oransim::simnet {

struct ScenarioSchedule {
  double total_s = 180.0;
  double clean_s = 90.0;
  double jam_s = 90.0;
  double jam_gain_db = 40.0;
  std::uint64_t kpm_interval_ms = 1000;
  std::uint64_t iq_interval_ms = 1000;
  std::uint64_t tick_ms = 100;

  void validate() const;
  std::uint64_t total_ms() const { return static_cast<std::uint64_t>(total_s * 1000.0 + 0.5); }
  std::uint64_t clean_ms() const { return static_cast<std::uint64_t>(clean_s * 1000.0 + 0.5); }
};

enum class RunMode : std::uint8_t { kDeterministic, kLive, kRacy };
std::string to_string(RunMode m);
RunMode run_mode_from_string(const std::string& s);

// Racy mode: the attacker's write lands grad_eval_ms per gradient evaluation
// after the store; the legitimate read happens U(read_lo, read_hi) ms after it.
struct RacyTiming {
  double grad_eval_ms = 12.0;
  double read_delay_lo_ms = 10.0;
  double read_delay_hi_ms = 100.0;
};

struct ScenarioConfig {
  ScenarioSchedule schedule;
  xapps::Variant variant = xapps::Variant::kSpec;
  bool attack_enabled = false;
  attacks::AttackKind attack_kind = attacks::AttackKind::kPgd;
  attacks::AttackConfig attack;  // mode/label are forced to targeted SOI
  double attack_start_s = -1.0;  // attack reports after this time; < 0: the jam phase
  LinkParams link;
  datagen::SignalConfig signal;
  datagen::SpectrogramConfig spectrogram;
  datagen::KpmBounds bounds;
  std::size_t kpm_t = 15;
  RunMode mode = RunMode::kDeterministic;
  RacyTiming racy;
  double time_scale = 1.0;  // live mode: virtual seconds per wall second
  std::uint16_t port = 0;   // live mode: 0 picks a free loopback port

  void validate() const;
};

struct TickRow {
  std::uint64_t t_ms = 0;
  bool jammed = false;
  double sinr_db = 0.0;
  int mcs = 0;
  double bler = 0.0;
  double throughput_mbps = 0.0;
  McsPolicy policy = McsPolicy::kFixedMax;
  int decision = -1;  // control action applied at this tick, -1 if none
};

struct DecisionRecord {
  std::uint64_t t_ms = 0;  // virtual time of the report that triggered it
  std::uint64_t version = 0;
  bool truth_jammed = false;
  std::size_t predicted = 0;
  bool perturbed = false;
  ric::ControlAction action = ric::ControlAction::kFixedMaxMcs;
  ric::StageTimes times;
  std::size_t payload_bytes = 0;
  double inference_ms = 0.0;
};

struct ScenarioTrace {
  xapps::Variant variant = xapps::Variant::kSpec;
  RunMode mode = RunMode::kDeterministic;
  std::uint64_t seed = 0;
  std::uint64_t clean_ms = 0;
  std::vector<TickRow> ticks;
  std::vector<DecisionRecord> decisions;
  std::uint64_t perturbed_reads = 0;
  std::uint64_t attacker_writes = 0;

  bool wall_clock() const { return mode == RunMode::kLive; }
};

/// Drives RAN, RIC and xApps through the schedule. `deployed` is the model
/// inside the InterClass xApp; the malicious xApp attacks a copy of it.
/// Deterministic and racy runs are bit-reproducible per seed.
ScenarioTrace run_scenario(const ScenarioConfig& cfg, std::shared_ptr<const nn::Model> deployed,
                           std::uint64_t seed);

/// tick,t_ms,phase,sinr_db,mcs,bler,throughput_mbps,policy,decision
void write_tick_csv(const ScenarioTrace& trace, std::ostream& out);
/// One row per decision. Wall-clock columns only for live traces.
void write_decision_csv(const ScenarioTrace& trace, std::ostream& out);

}  // namespace oransim::simnet
