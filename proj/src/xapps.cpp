// SPDX-License-Identifier: Apache-2.0
#include "oransim/xapps.hpp"

#include <chrono>

#include "oransim/errors.hpp"
#include "oransim/models.hpp"

namespace oransim::xapps {

std::string to_string(Variant v) { return v == Variant::kSpec ? "spec" : "kpm"; }

Variant variant_from_string(const std::string& s) {
  if (s == "spec" || s == "spectrogram") return Variant::kSpec;
  if (s == "kpm") return Variant::kKpm;
  throw InvalidArgument("unknown xApp variant '" + s + "'");
}

const std::string& data_key(Variant v) { return v == Variant::kSpec ? ric::kSpecKey : ric::kKpmKey; }

std::string to_string(Defense d) {
  switch (d) {
    case Defense::kNone: return "none";
    case Defense::kAdversarialTraining: return "adversarial_training";
    case Defense::kDistillation: return "distillation";
  }
  return "none";
}

Defense defense_from_string(const std::string& s) {
  if (s == "none") return Defense::kNone;
  if (s == "adversarial_training" || s == "advtrain") return Defense::kAdversarialTraining;
  if (s == "distillation" || s == "distill") return Defense::kDistillation;
  throw InvalidArgument("unknown defense '" + s + "'");
}

InterClassXapp::InterClassXapp(Variant variant, std::shared_ptr<const nn::Model> model, ric::RicDatabase& db)
    : variant_(variant), model_(std::move(model)), db_(db), handle_(db.open("interclass-" + to_string(variant), ric::kRead)) {
  if (!model_) throw InvalidArgument("InterClass xApp needs a model");
}

std::optional<XappDecision> InterClassXapp::step() {
  if (db_.latest_version(handle_, key()) <= last_version_) return std::nullopt;
  const auto t0 = std::chrono::steady_clock::now();
  ric::DbEntry e = db_.get_latest(handle_, key());
  Tensor x = ric::decode_tensor(e.value);
  auto pred = models::predict(*model_, x);
  const auto t1 = std::chrono::steady_clock::now();
  last_version_ = e.version;
  XappDecision d;
  d.decision = ric::decision_for_class(pred.label);
  d.version = e.version;
  d.probabilities = std::move(pred.probabilities);
  d.inference_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  return d;
}

MaliciousXapp::MaliciousXapp(Variant variant, attacks::AttackKind kind, attacks::AttackConfig cfg,
                             std::shared_ptr<const nn::Model> victim, ric::RicDatabase& db)
    : variant_(variant),
      kind_(kind),
      cfg_(cfg),
      victim_(std::move(victim)),
      db_(db),
      handle_(db.open("malicious", ric::kReadWrite)) {
  if (!victim_) throw InvalidArgument("malicious xApp needs a victim model copy");
  cfg_.validate();
}

std::size_t MaliciousXapp::gradient_evaluations() const noexcept {
  return kind_ == attacks::AttackKind::kFgsm ? 1 : cfg_.n_steps;
}

std::optional<std::uint64_t> MaliciousXapp::step() {
  ric::DbEntry e = db_.get_latest(handle_, data_key(variant_));
  if (e.version <= last_seen_ || written_.count(e.version)) return std::nullopt;
  Tensor x = ric::decode_tensor(e.value);
  auto adv = attacks::run_attack(kind_, *victim_, x, cfg_);
  last_budget_ = adv.budget_used;
  const auto v = db_.put(handle_, data_key(variant_), ric::encode_tensor(adv.x_adv), e.timestamp_ms);
  written_.insert(v);
  last_seen_ = v;
  return v;
}

}  // namespace oransim::xapps
