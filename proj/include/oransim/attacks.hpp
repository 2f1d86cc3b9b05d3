// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "oransim/nn.hpp"

namespace oransim::attacks {

enum class AttackKind : std::uint8_t { kFgsm, kPgd };
enum class AttackMode : std::uint8_t {
  kTargeted,    // descend the loss of `label` (the target class)
  kUntargeted,  // ascend the loss of `label` (the true class)
};

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);

struct AttackConfig {
  double epsilon = 0.0;    // L-infinity budget
  double step_size = 0.0;  // PGD alpha; 0 selects epsilon / 4
  std::size_t n_steps = 5;
  AttackMode mode = AttackMode::kUntargeted;
  std::size_t label = 0;
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  // Targeted mode only: step along +sign(grad) (the literal ascent formula)
  // instead of descending toward the target.
  bool ascent_sign_targeted = false;

  double effective_step() const { return step_size > 0.0 ? step_size : epsilon / 4.0; }
  void validate() const;
};

struct AdversarialExample {
  Tensor x_adv;
  Tensor origin;
  double budget_used = 0.0;  // max |x_adv - origin|
};

AdversarialExample fgsm(const nn::Model& model, const Tensor& x, const AttackConfig& cfg);
AdversarialExample pgd(const nn::Model& model, const Tensor& x, const AttackConfig& cfg);
AdversarialExample run_attack(AttackKind kind, const nn::Model& model, const Tensor& x, const AttackConfig& cfg);

}  // namespace oransim::attacks
