// SPDX-License-Identifier: Apache-2.0
#include "oransim/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "oransim/errors.hpp"

namespace oransim::attacks {

std::string to_string(AttackKind kind) { return kind == AttackKind::kFgsm ? "fgsm" : "pgd"; }

AttackKind attack_kind_from_string(const std::string& name) {
  if (name == "fgsm") return AttackKind::kFgsm;
  if (name == "pgd") return AttackKind::kPgd;
  throw InvalidArgument("unknown attack kind '" + name + "' (expected fgsm or pgd)");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be finite and >= 0");
  if (!(step_size >= 0.0) || !std::isfinite(step_size)) throw InvalidArgument("step_size must be finite and >= 0");
  if (n_steps == 0) throw InvalidArgument("n_steps must be >= 1");
  if (!(clip_lo < clip_hi)) throw InvalidArgument("clip domain must satisfy lo < hi");
}

namespace {

void check_input(const nn::Model& model, const Tensor& x, const AttackConfig& cfg) {
  cfg.validate();
  if (x.shape() != model.input_shape()) {
    throw InvalidArgument("attack input " + shape_to_string(x.shape()) + " does not match model input " +
                          shape_to_string(model.input_shape()));
  }
  if (cfg.label >= model.num_classes()) throw InvalidArgument("attack label out of range");
  for (double v : x.data()) {
    if (!(v >= cfg.clip_lo && v <= cfg.clip_hi)) throw InvalidArgument("attack input lies outside the clip domain");
  }
}

// +1 ascends the loss of cfg.label, -1 descends it.
double direction(const AttackConfig& cfg) {
  if (cfg.mode == AttackMode::kUntargeted || cfg.ascent_sign_targeted) return 1.0;
  return -1.0;
}

double sign(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

AdversarialExample finish(Tensor x_adv, const Tensor& x) {
  AdversarialExample out{std::move(x_adv), x, 0.0};
  out.budget_used = max_abs_diff(out.x_adv, out.origin);
  return out;
}

// x0 +/- eps can round to a point just outside the ball; step back by ulps so
// |v - x0| <= eps holds in double arithmetic.
double into_ball(double v, double x0, double eps) {
  v = std::clamp(v, x0 - eps, x0 + eps);
  while (v - x0 > eps) v = std::nextafter(v, x0);
  while (x0 - v > eps) v = std::nextafter(v, x0);
  return v;
}

}  // namespace

AdversarialExample fgsm(const nn::Model& model, const Tensor& x, const AttackConfig& cfg) {
  check_input(model, x, cfg);
  Tensor g = nn::grad_input(model, x, cfg.label);
  const double step = direction(cfg) * cfg.epsilon;
  Tensor x_adv = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    x_adv[i] = std::clamp(into_ball(x[i] + step * sign(g[i]), x[i], cfg.epsilon), cfg.clip_lo, cfg.clip_hi);
  }
  return finish(std::move(x_adv), x);
}

AdversarialExample pgd(const nn::Model& model, const Tensor& x, const AttackConfig& cfg) {
  check_input(model, x, cfg);
  const double step = direction(cfg) * cfg.effective_step();
  Tensor cur = x;
  for (std::size_t n = 0; n < cfg.n_steps; ++n) {
    Tensor g = nn::grad_input(model, cur, cfg.label);
    for (std::size_t i = 0; i < x.size(); ++i) {
      cur[i] = std::clamp(into_ball(cur[i] + step * sign(g[i]), x[i], cfg.epsilon), cfg.clip_lo, cfg.clip_hi);
    }
  }
  return finish(std::move(cur), x);
}

AdversarialExample run_attack(AttackKind kind, const nn::Model& model, const Tensor& x, const AttackConfig& cfg) {
  return kind == AttackKind::kFgsm ? fgsm(model, x, cfg) : pgd(model, x, cfg);
}

}  // namespace oransim::attacks
