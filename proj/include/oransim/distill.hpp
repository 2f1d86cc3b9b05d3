// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

#include "oransim/attacks.hpp"
#include "oransim/nn.hpp"

namespace oransim::distill {

struct DistillConfig {
  double teacher_T = 20.0;
  double student_T = 1.0;
  double kl_T = 20.0;  // temperature applied to both distributions inside the KL term
  double alpha = 0.1;  // weight of the hard-label term
  nn::TrainConfig teacher_cfg;
  nn::TrainConfig student_cfg;

  void validate() const;
};

/// alpha * CE(student, label, T_s) + (1 - alpha) * KL(teacher_probs || softmax(student / kl_T)).
/// `teacher_probs` are soft targets already computed at kl_T.
nn::LossAndGrad distillation_loss(std::span<const double> teacher_probs, std::span<const double> student_logits,
                                  std::size_t label, double alpha, double student_T, double kl_T);

/// Teacher probabilities at temperature T for every input of `data`.
std::vector<std::vector<double>> soft_targets(const nn::Model& teacher, const nn::LabeledSet& data, double T);

/// Trains a fresh model of `arch` with cross-entropy at teacher_T. The
/// initialisation seed is teacher_cfg.seed.
nn::Model train_teacher(const nn::Architecture& arch, const nn::LabeledSet& data, const DistillConfig& cfg);

/// Trains a fresh student (init seed student_cfg.seed) of `arch` against the
/// teacher's soft labels. `arch` must equal the teacher's architecture.
nn::Model distill_student(const nn::Model& teacher, const nn::Architecture& arch, const nn::LabeledSet& data,
                          const DistillConfig& cfg);

struct AdvTrainConfig {
  double epsilon = 0.02;
  attacks::AttackKind attack = attacks::AttackKind::kPgd;
  double augmentation_ratio = 0.5;  // fraction of the training set attacked and appended
  double warmup_fraction = 0.5;     // share of the epochs trained on clean data before attacking
  double clip_lo = 0.0;
  double clip_hi = 1.0;
  nn::TrainConfig train_cfg;

  void validate() const;
};

/// Warm-up on clean data, craft untargeted adversarial copies of a seeded
/// subset against the warm-up model, append them with their true labels and
/// finish training on the union.
nn::Model adversarial_train(const nn::Architecture& arch, const nn::LabeledSet& data, const AdvTrainConfig& cfg);

}  // namespace oransim::distill
