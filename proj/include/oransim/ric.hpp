// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>

#include "oransim/datagen.hpp"
#include "oransim/e2lite.hpp"
#include "oransim/ricdb.hpp"
#include "oransim/transport.hpp"

namespace oransim::ric {

inline const std::string kSpecKey = "spec/latest";
inline const std::string kKpmKey = "kpm/latest";

/// Millisecond timestamps for one data item. Virtual in deterministic runs,
/// steady-clock in live runs.
struct StageTimes {
  double sent = 0;       // RAN started transmitting
  double received = 0;   // RIC decoded the full message
  double forwarded = 0;  // handed to the processing service
  double stored = 0;     // processed and written to the database
  double inferred = 0;   // xApp read the entry and predicted
  double acked = 0;      // CONTROL acknowledged by the RAN
};

struct ControlDecision {
  ControlAction action = ControlAction::kFixedMaxMcs;
  std::size_t cause = 0;  // predicted class
};

/// SOI -> FIXED_MAX_MCS, CWI -> ADAPTIVE_MCS.
ControlDecision decision_for_class(std::size_t predicted_class);

struct StoredItem {
  std::string key;
  std::uint64_t version = 0;
  MsgType source = MsgType::kAck;
  std::uint32_t seq = 0;  // KPM sequence number, 0 for I/Q
  std::size_t payload_bytes = 0;
};

struct ControllerConfig {
  std::size_t kpm_t = 15;
  datagen::KpmBounds bounds;
  datagen::SpectrogramConfig spectrogram;
};

/// Indication routing and storage: turns raw RAN reports into database
/// entries the xApps consume.
class RicController {
 public:
  using Clock = std::function<double()>;

  RicController(RicDatabase& db, ControllerConfig cfg, Clock clock);

  /// IND_IQ -> spectrogram -> kSpecKey. IND_KPM -> window buffer -> kKpmKey
  /// once kpm_t reports have accumulated (nullopt before). `times.received`
  /// must be set by the caller; forwarded/stored are filled in here.
  std::optional<StoredItem> handle_indication(const E2Message& msg, StageTimes& times);

  const SdlHandle& handle() const noexcept { return handle_; }
  std::size_t kpm_buffered() const noexcept { return kpm_history_.size(); }

 private:
  RicDatabase& db_;
  ControllerConfig cfg_;
  Clock clock_;
  SdlHandle handle_;
  std::deque<simnet::KpmSample> kpm_history_;
};

/// Sends CONTROL and waits for the RAN's ACK on the same transport.
/// Throws IoError if the channel closes or answers with anything else.
E2Message send_control(Transport& transport, const ControlDecision& decision);

}  // namespace oransim::ric
