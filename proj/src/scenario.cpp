// SPDX-License-Identifier: Apache-2.0
#include "oransim/scenario.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <deque>
#include <mutex>
#include <optional>
#include <ostream>
#include <thread>

#include <spdlog/spdlog.h>

#include "oransim/errors.hpp"
#include "oransim/mailbox.hpp"
#include "oransim/models.hpp"

namespace oransim::simnet {

void ScenarioSchedule::validate() const {
  if (!(total_s > 0.0) || clean_s < 0.0 || jam_s < 0.0) throw InvalidArgument("schedule durations must be positive");
  if (std::abs(clean_s + jam_s - total_s) > 1e-9) throw InvalidArgument("schedule: clean_s + jam_s must equal total_s");
  if (tick_ms == 0 || kpm_interval_ms == 0 || iq_interval_ms == 0) throw InvalidArgument("schedule intervals must be > 0");
  if (kpm_interval_ms % tick_ms || iq_interval_ms % tick_ms) {
    throw InvalidArgument("report intervals must be multiples of the tick");
  }
}

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::kDeterministic: return "det";
    case RunMode::kLive: return "live";
    case RunMode::kRacy: return "racy";
  }
  return "det";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "det" || s == "deterministic") return RunMode::kDeterministic;
  if (s == "live") return RunMode::kLive;
  if (s == "racy") return RunMode::kRacy;
  throw InvalidArgument("unknown run mode '" + s + "'");
}

void ScenarioConfig::validate() const {
  schedule.validate();
  if (kpm_t == 0) throw InvalidArgument("kpm_t must be >= 1");
  if (attack_enabled) attack.validate();
  if (!(time_scale > 0.0)) throw InvalidArgument("time_scale must be > 0");
  if (racy.grad_eval_ms < 0 || racy.read_delay_lo_ms < 0 || racy.read_delay_hi_ms < racy.read_delay_lo_ms) {
    throw InvalidArgument("racy timing bounds are inconsistent");
  }
}

namespace {

McsPolicy policy_for(ric::ControlAction a) {
  return a == ric::ControlAction::kAdaptiveMcs ? McsPolicy::kAdaptive : McsPolicy::kFixedMax;
}

attacks::AttackConfig attacker_config(const ScenarioConfig& cfg) {
  attacks::AttackConfig a = cfg.attack;
  a.mode = attacks::AttackMode::kTargeted;
  a.label = models::kSoi;
  return a;
}

std::uint64_t attack_start_ms(const ScenarioConfig& cfg) {
  if (cfg.attack_start_s < 0.0) return cfg.schedule.clean_ms();
  return static_cast<std::uint64_t>(cfg.attack_start_s * 1000.0 + 0.5);
}

LinkState initial_state(const ScenarioConfig& cfg) {
  LinkState st;
  st.sinr_db = cfg.link.base_sinr_db;
  st.mcs = kMaxMcs;
  st.policy = McsPolicy::kFixedMax;
  st.jammer.gain_db = cfg.schedule.jam_gain_db;
  return st;
}

// The indication (if any) the RAN emits at the end of tick t.
std::optional<ric::E2Message> emit(const ScenarioConfig& cfg, const LinkState& st, std::uint64_t t,
                                   std::uint64_t seed, std::uint32_t& seq) {
  if (cfg.variant == xapps::Variant::kKpm) {
    if (t % cfg.schedule.kpm_interval_ms) return std::nullopt;
    return ric::E2Message{ric::MsgType::kIndKpm, ric::KpmReport::from_sample(st.kpm(), seq++).encode()};
  }
  if (t % cfg.schedule.iq_interval_ms) return std::nullopt;
  auto label = st.jammer.on ? datagen::SignalClass::kCwi : datagen::SignalClass::kSoi;
  auto frame = datagen::synth_iq_frame(label, st.jammer, datagen::mix_seed(seed, t), cfg.signal);
  return ric::E2Message{ric::MsgType::kIndIq, frame.to_bytes()};
}

TickRow row_of(const LinkState& st, std::uint64_t t, int applied) {
  return TickRow{t, st.jammer.on, st.sinr_db, st.mcs, st.bler, st.throughput_mbps, st.policy, applied};
}

ScenarioTrace run_virtual(const ScenarioConfig& cfg, std::shared_ptr<const nn::Model> deployed, std::uint64_t seed) {
  const auto& sch = cfg.schedule;
  ScenarioTrace trace;
  trace.variant = cfg.variant;
  trace.mode = cfg.mode;
  trace.seed = seed;
  trace.clean_ms = sch.clean_ms();

  double now = 0.0;
  ric::RicDatabase db;
  ric::RicController controller(db, ric::ControllerConfig{cfg.kpm_t, cfg.bounds, cfg.spectrogram},
                                [&now] { return now; });
  xapps::InterClassXapp app(cfg.variant, deployed, db);
  std::optional<xapps::MaliciousXapp> bad;
  if (cfg.attack_enabled) bad.emplace(cfg.variant, cfg.attack_kind, attacker_config(cfg), deployed, db);
  const std::uint64_t attack_from = attack_start_ms(cfg);

  std::mt19937_64 link_rng(seed);
  std::mt19937_64 race_rng(datagen::mix_seed(seed, 0x7ace));
  std::uniform_real_distribution<double> read_delay(cfg.racy.read_delay_lo_ms, cfg.racy.read_delay_hi_ms);

  LinkState st = initial_state(cfg);
  std::optional<ric::ControlAction> pending;
  std::uint32_t seq = 0;
  for (std::uint64_t t = sch.tick_ms; t <= sch.total_ms(); t += sch.tick_ms) {
    int applied = -1;
    if (pending) {
      st = apply_control(st, policy_for(*pending), cfg.link);
      applied = static_cast<int>(*pending);
      pending.reset();
    }
    st.jammer.on = t > sch.clean_ms();
    st = link_step(st, sch.tick_ms, cfg.link, link_rng);
    trace.ticks.push_back(row_of(st, t, applied));

    auto msg = emit(cfg, st, t, seed, seq);
    if (!msg) continue;
    now = static_cast<double>(t);
    ric::StageTimes times;
    times.sent = times.received = now;
    // The wire codec is exercised even without a socket.
    auto item = controller.handle_indication(ric::decode_message(ric::encode_message(*msg)), times);
    if (!item) continue;

    bool late_attack = false;
    if (bad && t > attack_from) {
      if (cfg.mode == RunMode::kRacy) {
        const double cost = static_cast<double>(bad->gradient_evaluations()) * cfg.racy.grad_eval_ms;
        late_attack = cost > read_delay(race_rng);
      }
      if (!late_attack) {
        bad->step();
        ++trace.attacker_writes;
      }
    }
    auto d = app.step();
    if (!d) throw std::logic_error("InterClass xApp found no new entry after a store");
    if (late_attack) {
      bad->step();
      ++trace.attacker_writes;
    }
    times.inferred = times.acked = now;

    DecisionRecord rec;
    rec.t_ms = t;
    rec.version = d->version;
    rec.truth_jammed = st.jammer.on;
    rec.predicted = d->decision.cause;
    rec.perturbed = bad && bad->wrote(d->version);
    rec.action = d->decision.action;
    rec.times = times;
    rec.payload_bytes = item->payload_bytes;
    rec.inference_ms = d->inference_ms;
    if (rec.perturbed) ++trace.perturbed_reads;
    trace.decisions.push_back(std::move(rec));
    pending = d->decision.action;
  }
  return trace;
}

// ------------------------------------------------------------------ live

struct SentRecord {
  double sent_ms;
  std::uint64_t t_ms;
  bool jammed;
};

struct Inbound {
  ric::E2Message msg;
  double received_ms;
};

ScenarioTrace run_live(const ScenarioConfig& cfg, std::shared_ptr<const nn::Model> deployed, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const auto& sch = cfg.schedule;
  ScenarioTrace trace;
  trace.variant = cfg.variant;
  trace.mode = cfg.mode;
  trace.seed = seed;
  trace.clean_ms = sch.clean_ms();

  const auto t0 = clock::now();
  auto wall_ms = [t0] { return std::chrono::duration<double, std::milli>(clock::now() - t0).count(); };

  ric::LoopbackListener listener(cfg.port);
  std::unique_ptr<ric::Transport> ran_end;
  std::thread connector([&] { ran_end = ric::connect_loopback(listener.port()); });
  auto ric_end = listener.accept();
  connector.join();

  ric::RicDatabase db;
  ric::RicController controller(db, ric::ControllerConfig{cfg.kpm_t, cfg.bounds, cfg.spectrogram}, wall_ms);
  xapps::InterClassXapp app(cfg.variant, deployed, db);
  std::optional<xapps::MaliciousXapp> bad;
  if (cfg.attack_enabled) bad.emplace(cfg.variant, cfg.attack_kind, attacker_config(cfg), deployed, db);
  const std::uint64_t attack_from = attack_start_ms(cfg);

  std::mutex sent_mu;
  std::deque<SentRecord> sent_fifo;  // one ordered stream, so FIFO matching is exact
  std::mutex state_mu;
  std::optional<ric::ControlAction> pending;

  Mailbox<Inbound> indications;
  Mailbox<double> acks;
  std::atomic<std::size_t> emitted{0}, handled{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto record_failure = [&] {
    std::lock_guard lock(failure_mu);
    if (!failure) failure = std::current_exception();
  };

  // RAN side: control receiver answers every CONTROL with an ACK.
  std::thread ran_rx([&] {
    try {
      while (auto m = ran_end->receive()) {
        if (m->type != ric::MsgType::kControl) throw ProtocolError("RAN expected CONTROL, got " + ric::to_string(m->type));
        auto action = ric::parse_control(*m);
        {
          std::lock_guard lock(state_mu);
          pending = action;
        }
        ran_end->send(ric::make_ack());
      }
    } catch (...) {
      record_failure();
    }
  });

  // RIC side: E2 termination splits indications from ACKs.
  std::thread e2([&] {
    try {
      while (auto m = ric_end->receive()) {
        const double at = wall_ms();
        if (m->type == ric::MsgType::kAck) {
          acks.push(at);
        } else {
          indications.push(Inbound{std::move(*m), at});
        }
      }
    } catch (...) {
      record_failure();
    }
    indications.close();
    acks.close();
  });

  std::thread ric_loop([&] {
    try {
      while (auto in = indications.pop()) {
        SentRecord origin{};
        {
          std::lock_guard lock(sent_mu);
          origin = sent_fifo.front();
          sent_fifo.pop_front();
        }
        ric::StageTimes times;
        times.sent = origin.sent_ms;
        times.received = in->received_ms;
        auto item = controller.handle_indication(in->msg, times);
        if (!item) {
          ++handled;
          continue;
        }
        if (bad && origin.t_ms > attack_from) {
          bad->step();
          ++trace.attacker_writes;
        }
        auto d = app.step();
        if (!d) throw std::logic_error("InterClass xApp found no new entry after a store");
        times.inferred = wall_ms();
        ric_end->send(ric::make_control(d->decision.action));
        auto ack = acks.pop_for(std::chrono::seconds(5));
        if (!ack) throw IoError("no ACK from the RAN within 5 s");
        times.acked = *ack;

        DecisionRecord rec;
        rec.t_ms = origin.t_ms;
        rec.version = d->version;
        rec.truth_jammed = origin.jammed;
        rec.predicted = d->decision.cause;
        rec.perturbed = bad && bad->wrote(d->version);
        rec.action = d->decision.action;
        rec.times = times;
        rec.payload_bytes = item->payload_bytes;
        rec.inference_ms = d->inference_ms;
        if (rec.perturbed) ++trace.perturbed_reads;
        trace.decisions.push_back(std::move(rec));
        ++handled;
      }
    } catch (...) {
      record_failure();
      indications.close();
    }
  });

  // RAN main loop, paced on the wall clock.
  std::mt19937_64 link_rng(seed);
  LinkState st = initial_state(cfg);
  std::uint32_t seq = 0;
  try {
    for (std::uint64_t t = sch.tick_ms; t <= sch.total_ms(); t += sch.tick_ms) {
      std::this_thread::sleep_until(t0 + std::chrono::duration<double, std::milli>(t / cfg.time_scale));
      int applied = -1;
      {
        std::lock_guard lock(state_mu);
        if (pending) {
          st = apply_control(st, policy_for(*pending), cfg.link);
          applied = static_cast<int>(*pending);
          pending.reset();
        }
      }
      st.jammer.on = t > sch.clean_ms();
      st = link_step(st, sch.tick_ms, cfg.link, link_rng);
      trace.ticks.push_back(row_of(st, t, applied));
      auto msg = emit(cfg, st, t, seed, seq);
      if (!msg) continue;
      {
        std::lock_guard lock(sent_mu);
        sent_fifo.push_back(SentRecord{wall_ms(), t, st.jammer.on});
      }
      ++emitted;
      ran_end->send(*msg);
      std::lock_guard lock(failure_mu);
      if (failure) break;
    }
    // Let the RIC drain what is in flight.
    const auto deadline = clock::now() + std::chrono::seconds(30);
    while (handled.load() < emitted.load() && clock::now() < deadline) {
      {
        std::lock_guard lock(failure_mu);
        if (failure) break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  } catch (...) {
    record_failure();
  }
  ran_end->close();
  ric_end->close();
  ran_rx.join();
  e2.join();
  ric_loop.join();
  if (failure) std::rethrow_exception(failure);
  if (handled.load() < emitted.load()) throw IoError("RIC did not drain the indication stream in time");
  return trace;
}

const char* phase_name(bool jammed) { return jammed ? "jam" : "clean"; }

const char* action_name(ric::ControlAction a) {
  return a == ric::ControlAction::kAdaptiveMcs ? "ADAPTIVE_MCS" : "FIXED_MAX_MCS";
}

}  // namespace

ScenarioTrace run_scenario(const ScenarioConfig& cfg, std::shared_ptr<const nn::Model> deployed, std::uint64_t seed) {
  cfg.validate();
  if (!deployed) throw InvalidArgument("run_scenario needs a deployed model");
  spdlog::debug("scenario {} variant={} attack={} seed={}", to_string(cfg.mode), xapps::to_string(cfg.variant),
                cfg.attack_enabled, seed);
  if (cfg.mode == RunMode::kLive) return run_live(cfg, std::move(deployed), seed);
  return run_virtual(cfg, std::move(deployed), seed);
}

void write_tick_csv(const ScenarioTrace& trace, std::ostream& out) {
  out << "tick,t_ms,phase,sinr_db,mcs,bler,throughput_mbps,policy,decision\n";
  char buf[256];
  for (std::size_t i = 0; i < trace.ticks.size(); ++i) {
    const auto& r = trace.ticks[i];
    std::snprintf(buf, sizeof(buf), "%zu,%llu,%s,%.6f,%d,%.6f,%.6f,%s,%s\n", i,
                  static_cast<unsigned long long>(r.t_ms), phase_name(r.jammed), r.sinr_db, r.mcs, r.bler,
                  r.throughput_mbps, r.policy == McsPolicy::kAdaptive ? "adaptive" : "fixed_max",
                  r.decision < 0 ? "" : action_name(static_cast<ric::ControlAction>(r.decision)));
    out << buf;
  }
}

void write_decision_csv(const ScenarioTrace& trace, std::ostream& out) {
  const bool wall = trace.wall_clock();
  out << "t_ms,version,truth,predicted,perturbed,action,payload_bytes";
  if (wall) out << ",sent_ms,received_ms,forwarded_ms,stored_ms,inferred_ms,acked_ms,inference_ms";
  out << "\n";
  char buf[512];
  for (const auto& d : trace.decisions) {
    std::snprintf(buf, sizeof(buf), "%llu,%llu,%s,%s,%d,%s,%zu", static_cast<unsigned long long>(d.t_ms),
                  static_cast<unsigned long long>(d.version), d.truth_jammed ? "cwi" : "soi",
                  d.predicted == models::kCwi ? "cwi" : "soi", d.perturbed ? 1 : 0,
                  action_name(d.action), d.payload_bytes);
    out << buf;
    if (wall) {
      const auto& s = d.times;
      std::snprintf(buf, sizeof(buf), ",%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f", s.sent, s.received, s.forwarded,
                    s.stored, s.inferred, s.acked, d.inference_ms);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace oransim::simnet
