// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>

#include "oransim/attacks.hpp"
#include "oransim/ric.hpp"

namespace oransim::xapps {

enum class Variant : std::uint8_t { kSpec, kKpm };
std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
const std::string& data_key(Variant v);

enum class Defense : std::uint8_t { kNone, kAdversarialTraining, kDistillation };
std::string to_string(Defense d);
Defense defense_from_string(const std::string& s);

struct XappDecision {
  ric::ControlDecision decision;
  std::uint64_t version = 0;
  std::vector<double> probabilities;
  double inference_ms = 0.0;  // wall-clock cost of decode + predict
};

/// Legitimate interference classifier: one decision per new version of its
/// data key, nothing otherwise.
class InterClassXapp {
 public:
  InterClassXapp(Variant variant, std::shared_ptr<const nn::Model> model, ric::RicDatabase& db);

  std::optional<XappDecision> step();
  Variant variant() const noexcept { return variant_; }
  const std::string& key() const noexcept { return data_key(variant_); }
  std::uint64_t last_version() const noexcept { return last_version_; }

 private:
  Variant variant_;
  std::shared_ptr<const nn::Model> model_;
  ric::RicDatabase& db_;
  ric::SdlHandle handle_;
  std::uint64_t last_version_ = 0;
};

/// White-box adversary sharing the database. Rewrites the latest entry of the
/// data key with an adversarial copy; never touches the victim's parameters.
class MaliciousXapp {
 public:
  MaliciousXapp(Variant variant, attacks::AttackKind kind, attacks::AttackConfig cfg,
                std::shared_ptr<const nn::Model> victim, ric::RicDatabase& db);

  /// Perturbs the latest entry unless it was already handled. Returns the
  /// version written. Throws NotFound when the key is absent.
  std::optional<std::uint64_t> step();

  /// Versions this xApp wrote (bookkeeping for the scenario trace).
  bool wrote(std::uint64_t version) const { return written_.count(version) != 0; }
  double last_budget_used() const noexcept { return last_budget_; }
  std::size_t gradient_evaluations() const noexcept;

 private:
  Variant variant_;
  attacks::AttackKind kind_;
  attacks::AttackConfig cfg_;
  std::shared_ptr<const nn::Model> victim_;
  ric::RicDatabase& db_;
  ric::SdlHandle handle_;
  std::uint64_t last_seen_ = 0;
  std::set<std::uint64_t> written_;
  double last_budget_ = 0.0;
};

}  // namespace oransim::xapps
