// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "oransim/distill.hpp"
#include "oransim/errors.hpp"

using namespace oransim;
using namespace oransim::distill;

namespace {

nn::Architecture dnn(std::size_t in) {
  return {{in}, {nn::Dense{8, nn::Activation::kRelu}, nn::Dense{2, nn::Activation::kLinear}}};
}

nn::LabeledSet xor_set() {
  nn::LabeledSet s;
  for (int rep = 0; rep < 4; ++rep) {
    s.push_back(Tensor{0.0, 0.0}, 0);
    s.push_back(Tensor{1.0, 1.0}, 0);
    s.push_back(Tensor{0.0, 1.0}, 1);
    s.push_back(Tensor{1.0, 0.0}, 1);
  }
  return s;
}

DistillConfig xor_config() {
  DistillConfig cfg;
  cfg.teacher_cfg.learning_rate = 0.1 * cfg.teacher_T;
  cfg.teacher_cfg.epochs = 600;
  cfg.teacher_cfg.batch_size = 4;
  cfg.teacher_cfg.seed = 3;
  cfg.student_cfg = cfg.teacher_cfg;
  cfg.student_cfg.seed = 4;
  return cfg;
}

std::vector<double> random_probs(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<double> p(k);
  double s = 0;
  for (auto& v : p) s += (v = u(rng));
  for (auto& v : p) v /= s;
  return p;
}

}  // namespace

TEST(DistillationLoss, DecomposesIntoWeightedTerms) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> z(-6.0, 6.0);
  std::uniform_int_distribution<std::size_t> kdist(2, 6);
  int cases = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = kdist(rng);
    auto teacher = random_probs(k, rng);
    Tensor logits(Shape{k});
    for (auto& v : logits.data()) v = z(rng);
    const std::size_t label = trial % k;
    const double kl_t = 1.0 + 30.0 * std::uniform_real_distribution<double>(0, 1)(rng);
    const double ce = nn::cross_entropy_t(logits, label, 1.0);
    const double kl = nn::kl_loss(Tensor(Shape{k}, teacher),
                                  nn::clamp_probabilities(nn::softmax_t(logits, kl_t)));
    for (double alpha : {0.0, 0.1, 0.5, 1.0}) {
      auto got = distillation_loss(teacher, logits.data(), label, alpha, 1.0, kl_t);
      ASSERT_NEAR(got.loss, alpha * ce + (1 - alpha) * kl, 1e-12);
      ++cases;
    }
  }
  EXPECT_GE(cases, 1000);
}

TEST(DistillationLoss, AlphaOneIsPlainCrossEntropy) {
  std::vector<double> teacher{0.3, 0.7};
  std::vector<double> logits{0.4, -1.2};
  auto d = distillation_loss(teacher, logits, 1, 1.0, 1.0, 20.0);
  auto ce = nn::cross_entropy_t_grad(logits, 1, 1.0);
  EXPECT_EQ(d.loss, ce.loss);
  EXPECT_EQ(d.dlogits, ce.dlogits);
}

TEST(DistillationLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> z(-3.0, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    auto teacher = random_probs(3, rng);
    std::vector<double> logits{z(rng), z(rng), z(rng)};
    const double alpha = 0.1, kt = 5.0;
    auto g = distillation_loss(teacher, logits, trial % 3, alpha, 1.0, kt);
    for (std::size_t i = 0; i < 3; ++i) {
      auto lp = logits, lm = logits;
      lp[i] += 1e-6;
      lm[i] -= 1e-6;
      double fd = (distillation_loss(teacher, lp, trial % 3, alpha, 1.0, kt).loss -
                   distillation_loss(teacher, lm, trial % 3, alpha, 1.0, kt).loss) /
                  2e-6;
      ASSERT_NEAR(g.dlogits[i], fd, 1e-7);
    }
  }
}

TEST(Teacher, SofterAtTeacherTemperature) {
  auto cfg = xor_config();
  auto teacher = train_teacher(dnn(2), xor_set(), cfg);
  for (const auto& x : xor_set().inputs) {
    auto z = nn::forward(teacher, x);
    if (z[0] == z[1]) continue;
    auto hot = nn::softmax_t(z, 1.0);
    auto soft = nn::softmax_t(z, cfg.teacher_T);
    EXPECT_LT(std::max(soft[0], soft[1]), std::max(hot[0], hot[1]));
  }
}

TEST(Teacher, DeterministicForSeed) {
  auto cfg = xor_config();
  cfg.teacher_cfg.epochs = 20;
  auto a = train_teacher(dnn(2), xor_set(), cfg);
  auto b = train_teacher(dnn(2), xor_set(), cfg);
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(a.params()[i].weights, b.params()[i].weights);
    EXPECT_EQ(a.params()[i].bias, b.params()[i].bias);
  }
}

TEST(Student, LearnsXorFromTeacher) {
  auto cfg = xor_config();
  auto data = xor_set();
  auto teacher = train_teacher(dnn(2), data, cfg);
  ASSERT_EQ(nn::accuracy(teacher, data), 1.0);
  auto student = distill_student(teacher, dnn(2), data, cfg);
  EXPECT_EQ(student.architecture(), teacher.architecture());
  EXPECT_EQ(nn::accuracy(student, data), 1.0);
}

TEST(Student, ArchitectureMismatchRejected) {
  auto cfg = xor_config();
  cfg.teacher_cfg.epochs = 1;
  auto teacher = train_teacher(dnn(2), xor_set(), cfg);
  nn::Architecture other{{2}, {nn::Dense{4, nn::Activation::kRelu}, nn::Dense{2, nn::Activation::kLinear}}};
  EXPECT_THROW(distill_student(teacher, other, xor_set(), cfg), InvalidArgument);
}

TEST(DistillConfig, Validation) {
  DistillConfig cfg;
  cfg.alpha = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = DistillConfig{};
  cfg.teacher_T = 1.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  EXPECT_THROW(train_teacher(dnn(2), nn::LabeledSet{}, DistillConfig{}), InvalidArgument);
}

TEST(AdversarialTraining, RatioBoundaries) {
  AdvTrainConfig cfg;
  cfg.augmentation_ratio = 0.0;
  EXPECT_THROW(adversarial_train(dnn(2), xor_set(), cfg), InvalidArgument);
  cfg.augmentation_ratio = 1.5;
  EXPECT_THROW(adversarial_train(dnn(2), xor_set(), cfg), InvalidArgument);
  cfg.augmentation_ratio = 1.0;
  EXPECT_THROW(adversarial_train(dnn(2), nn::LabeledSet{}, cfg), InvalidArgument);
}

TEST(AdversarialTraining, DeterministicAndAccurateOnToySet) {
  AdvTrainConfig cfg;
  cfg.epsilon = 0.05;
  cfg.train_cfg.learning_rate = 0.1;
  cfg.train_cfg.epochs = 600;
  cfg.train_cfg.batch_size = 4;
  cfg.train_cfg.seed = 3;
  auto a = adversarial_train(dnn(2), xor_set(), cfg);
  auto b = adversarial_train(dnn(2), xor_set(), cfg);
  EXPECT_EQ(a.params()[0].weights, b.params()[0].weights);
  EXPECT_EQ(nn::accuracy(a, xor_set()), 1.0);
}
