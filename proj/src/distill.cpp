// SPDX-License-Identifier: Apache-2.0
#include "oransim/distill.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "oransim/errors.hpp"

namespace oransim::distill {

namespace {

void check_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument(std::string(what) + " must be positive");
}

}  // namespace

void DistillConfig::validate() const {
  check_positive(teacher_T, "teacher_T");
  check_positive(student_T, "student_T");
  check_positive(kl_T, "kl_T");
  if (!(teacher_T > 1.0)) throw InvalidArgument("teacher_T must exceed 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must lie in [0, 1]");
  teacher_cfg.validate();
  student_cfg.validate();
}

nn::LossAndGrad distillation_loss(std::span<const double> teacher_probs, std::span<const double> student_logits,
                                  std::size_t label, double alpha, double student_T, double kl_T) {
  nn::LossAndGrad out;
  out.dlogits.assign(student_logits.size(), 0.0);
  if (alpha > 0.0) {
    auto ce = nn::cross_entropy_t_grad(student_logits, label, student_T);
    out.loss += alpha * ce.loss;
    for (std::size_t i = 0; i < ce.dlogits.size(); ++i) out.dlogits[i] += alpha * ce.dlogits[i];
  }
  if (alpha < 1.0) {
    auto kl = nn::kl_loss_grad(teacher_probs, student_logits, kl_T);
    out.loss += (1.0 - alpha) * kl.loss;
    for (std::size_t i = 0; i < kl.dlogits.size(); ++i) out.dlogits[i] += (1.0 - alpha) * kl.dlogits[i];
  }
  return out;
}

std::vector<std::vector<double>> soft_targets(const nn::Model& teacher, const nn::LabeledSet& data, double T) {
  std::vector<std::vector<double>> out;
  out.reserve(data.size());
  for (const auto& x : data.inputs) {
    auto p = nn::softmax_t(nn::forward(teacher, x).data(), T);
    for (double& v : p) v = std::max(v, nn::kProbabilityFloor);
    out.push_back(std::move(p));
  }
  return out;
}

nn::Model train_teacher(const nn::Architecture& arch, const nn::LabeledSet& data, const DistillConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("teacher training set is empty");
  nn::TrainConfig tc = cfg.teacher_cfg;
  tc.temperature = cfg.teacher_T;
  spdlog::debug("training teacher at T={} for {} epochs", tc.temperature, tc.epochs);
  return nn::train(nn::Model::initialized(arch, tc.seed), data, tc);
}

nn::Model distill_student(const nn::Model& teacher, const nn::Architecture& arch, const nn::LabeledSet& data,
                          const DistillConfig& cfg) {
  cfg.validate();
  if (!(arch == teacher.architecture())) {
    throw InvalidArgument("student architecture must equal the teacher architecture");
  }
  if (data.empty()) throw InvalidArgument("student training set is empty");
  const auto targets = soft_targets(teacher, data, cfg.kl_T);
  const double alpha = cfg.alpha, ts = cfg.student_T, kt = cfg.kl_T;
  spdlog::debug("distilling student: alpha={} kl_T={} epochs={}", alpha, kt, cfg.student_cfg.epochs);
  return nn::train(nn::Model::initialized(arch, cfg.student_cfg.seed), data, cfg.student_cfg,
                   [&](std::span<const double> z, std::size_t idx, std::size_t y) {
                     return distillation_loss(targets[idx], z, y, alpha, ts, kt);
                   });
}

void AdvTrainConfig::validate() const {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InvalidArgument("epsilon must be >= 0");
  if (!(augmentation_ratio > 0.0 && augmentation_ratio <= 1.0)) {
    throw InvalidArgument("augmentation_ratio must lie in (0, 1]");
  }
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) throw InvalidArgument("warmup_fraction must lie in [0, 1)");
  if (!(clip_lo < clip_hi)) throw InvalidArgument("clip domain must satisfy lo < hi");
  train_cfg.validate();
}

nn::Model adversarial_train(const nn::Architecture& arch, const nn::LabeledSet& data, const AdvTrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw InvalidArgument("adversarial training set is empty");

  nn::Model model = nn::Model::initialized(arch, cfg.train_cfg.seed);
  const auto warm_epochs = static_cast<std::size_t>(std::floor(cfg.warmup_fraction * cfg.train_cfg.epochs));
  if (warm_epochs > 0) {
    nn::TrainConfig wc = cfg.train_cfg;
    wc.epochs = warm_epochs;
    model = nn::train(std::move(model), data, wc);
  }

  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(cfg.train_cfg.seed ^ 0xad7e5a11ULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_adv = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg.augmentation_ratio * static_cast<double>(data.size()))));

  attacks::AttackConfig ac;
  ac.epsilon = cfg.epsilon;
  ac.mode = attacks::AttackMode::kUntargeted;
  ac.clip_lo = cfg.clip_lo;
  ac.clip_hi = cfg.clip_hi;
  nn::LabeledSet augmented = data;
  for (std::size_t k = 0; k < n_adv; ++k) {
    const std::size_t i = idx[k];
    ac.label = data.labels[i];
    augmented.push_back(attacks::run_attack(cfg.attack, model, data.inputs[i], ac).x_adv, data.labels[i]);
  }
  spdlog::debug("adversarial training: {} warm-up epochs, {} adversarial samples", warm_epochs, n_adv);

  nn::TrainConfig rest = cfg.train_cfg;
  rest.epochs = cfg.train_cfg.epochs - warm_epochs;
  rest.seed = cfg.train_cfg.seed + 1;
  return nn::train(std::move(model), augmented, rest);
}

}  // namespace oransim::distill
