// SPDX-License-Identifier: Apache-2.0
#include "oransim/ric.hpp"

#include "oransim/errors.hpp"

namespace oransim::ric {

ControlDecision decision_for_class(std::size_t predicted_class) {
  return {predicted_class == 0 ? ControlAction::kFixedMaxMcs : ControlAction::kAdaptiveMcs, predicted_class};
}

RicController::RicController(RicDatabase& db, ControllerConfig cfg, Clock clock)
    : db_(db), cfg_(std::move(cfg)), clock_(std::move(clock)), handle_(db.open("ric-controller", kReadWrite)) {
  if (cfg_.kpm_t == 0) throw InvalidArgument("kpm_t must be >= 1");
}

std::optional<StoredItem> RicController::handle_indication(const E2Message& msg, StageTimes& times) {
  times.forwarded = clock_();
  StoredItem item;
  item.source = msg.type;
  item.payload_bytes = msg.payload.size();
  switch (msg.type) {
    case MsgType::kIndIq: {
      if (msg.payload.size() != kIqPayloadBytes) throw ProtocolError("IND_IQ payload has the wrong size");
      auto frame = datagen::IqFrame::from_bytes(msg.payload);
      Tensor spec = datagen::iq_to_spectrogram(frame, cfg_.spectrogram);
      times.stored = clock_();
      item.key = kSpecKey;
      item.version = db_.put(handle_, kSpecKey, encode_tensor(spec), static_cast<std::uint64_t>(times.stored));
      break;
    }
    case MsgType::kIndKpm: {
      auto report = KpmReport::decode(msg.payload);
      kpm_history_.push_back(report.to_sample());
      while (kpm_history_.size() > cfg_.kpm_t) kpm_history_.pop_front();
      if (kpm_history_.size() < cfg_.kpm_t) return std::nullopt;
      std::vector<simnet::KpmSample> hist(kpm_history_.begin(), kpm_history_.end());
      Tensor window = datagen::gen_kpm_window(hist, cfg_.kpm_t, cfg_.bounds);
      times.stored = clock_();
      item.key = kKpmKey;
      item.seq = report.seq;
      item.version = db_.put(handle_, kKpmKey, encode_tensor(window), static_cast<std::uint64_t>(times.stored));
      break;
    }
    default:
      throw ProtocolError("handle_indication expects IND_IQ or IND_KPM, got " + to_string(msg.type));
  }
  return item;
}

E2Message send_control(Transport& transport, const ControlDecision& decision) {
  E2Message msg = make_control(decision.action);
  transport.send(msg);
  auto reply = transport.receive();
  if (!reply) throw IoError("transport closed while waiting for control ACK");
  if (reply->type != MsgType::kAck) throw IoError("expected ACK after CONTROL, got " + to_string(reply->type));
  return msg;
}

}  // namespace oransim::ric
