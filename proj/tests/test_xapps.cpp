// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <random>

#include "oransim/datagen.hpp"
#include "oransim/errors.hpp"
#include "oransim/models.hpp"
#include "oransim/xapps.hpp"

using namespace oransim;
using namespace oransim::xapps;

namespace {

std::shared_ptr<const nn::Model> random_kpm_model(std::uint64_t seed) {
  return std::make_shared<const nn::Model>(models::build_kpm_model(models::KpmDescriptor{}, seed));
}

Tensor random_window(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor x(Shape{60});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = u(rng);
  return x;
}

// Small trained KPM classifier shared by the behavioural tests.
struct Trained {
  std::shared_ptr<const nn::Model> model;
  nn::LabeledSet test;
};

const Trained& trained() {
  static const Trained t = [] {
    auto ds = datagen::build_dataset(datagen::DatasetKind::kKpm, {600, 400}, 11);
    auto split = datagen::stratified_split(ds.samples, 0.8, 11);
    nn::TrainConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 20;
    cfg.seed = 11;
    auto m = nn::train(models::build_kpm_model(models::KpmDescriptor{}, 11), split.train, cfg);
    return Trained{std::make_shared<const nn::Model>(std::move(m)), split.test};
  }();
  return t;
}

}  // namespace

TEST(Names, RoundTrip) {
  EXPECT_EQ(variant_from_string(to_string(Variant::kSpec)), Variant::kSpec);
  EXPECT_EQ(variant_from_string(to_string(Variant::kKpm)), Variant::kKpm);
  for (auto d : {Defense::kNone, Defense::kAdversarialTraining, Defense::kDistillation}) {
    EXPECT_EQ(defense_from_string(to_string(d)), d);
  }
  EXPECT_THROW(variant_from_string("radar"), InvalidArgument);
  EXPECT_THROW(defense_from_string("prayer"), InvalidArgument);
}

TEST(InterClass, OneDecisionPerNewVersion) {
  ric::RicDatabase db;
  auto writer = db.open("ran", ric::kWrite);
  InterClassXapp app(Variant::kKpm, random_kpm_model(1), db);
  std::mt19937_64 rng(5);

  EXPECT_FALSE(app.step().has_value());  // key absent counts as stale
  db.put(writer, ric::kKpmKey, ric::encode_tensor(random_window(rng)), 0);
  auto d = app.step();
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->version, 1u);
  EXPECT_FALSE(app.step().has_value());

  db.put(writer, ric::kKpmKey, ric::encode_tensor(random_window(rng)), 1);
  db.put(writer, ric::kKpmKey, ric::encode_tensor(random_window(rng)), 2);
  d = app.step();
  ASSERT_TRUE(d.has_value());
  EXPECT_EQ(d->version, 3u);  // always the latest, never the skipped one
  EXPECT_FALSE(app.step().has_value());
}

TEST(InterClass, IgnoresOtherKeys) {
  ric::RicDatabase db;
  auto writer = db.open("ran", ric::kWrite);
  InterClassXapp app(Variant::kKpm, random_kpm_model(1), db);
  std::mt19937_64 rng(6);
  db.put(writer, ric::kSpecKey, ric::encode_tensor(random_window(rng)), 0);
  EXPECT_FALSE(app.step().has_value());
}

TEST(InterClass, DecisionMatchesOfflinePredict) {
  ric::RicDatabase db;
  auto writer = db.open("ran", ric::kWrite);
  auto model = random_kpm_model(3);
  InterClassXapp app(Variant::kKpm, model, db);
  std::mt19937_64 rng(7);
  for (int i = 0; i < 50; ++i) {
    Tensor x = random_window(rng);
    db.put(writer, ric::kKpmKey, ric::encode_tensor(x), i);
    auto d = app.step();
    ASSERT_TRUE(d.has_value());
    auto p = models::predict(*model, x);
    EXPECT_EQ(d->decision.cause, p.label);
    EXPECT_EQ(d->decision.action, ric::decision_for_class(p.label).action);
    EXPECT_GE(d->inference_ms, 0.0);
  }
}

TEST(Malicious, ZeroEpsilonRewritesIdenticalBytes) {
  ric::RicDatabase db;
  auto writer = db.open("ran", ric::kWrite);
  auto reader = db.open("probe", ric::kRead);
  attacks::AttackConfig cfg;
  cfg.epsilon = 0.0;
  cfg.mode = attacks::AttackMode::kTargeted;
  cfg.label = models::kSoi;
  MaliciousXapp bad(Variant::kKpm, attacks::AttackKind::kPgd, cfg, random_kpm_model(2), db);
  std::mt19937_64 rng(8);
  const auto bytes = ric::encode_tensor(random_window(rng));
  db.put(writer, ric::kKpmKey, bytes, 0);
  auto v = bad.step();
  ASSERT_TRUE(v.has_value());
  EXPECT_EQ(*v, 2u);
  EXPECT_TRUE(bad.wrote(2));
  EXPECT_FALSE(bad.wrote(1));
  EXPECT_EQ(db.get_latest(reader, ric::kKpmKey).value, bytes);
  EXPECT_FALSE(bad.step().has_value());  // its own write is not re-attacked
}

TEST(Malicious, WritesStayInsideBudget) {
  ric::RicDatabase db;
  auto writer = db.open("ran", ric::kWrite);
  auto reader = db.open("probe", ric::kRead);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> eps(0.0, 0.2);
  auto model = random_kpm_model(4);
  const auto before = models::serialize_model(*model);
  for (int i = 0; i < 200; ++i) {
    attacks::AttackConfig cfg;
    cfg.epsilon = eps(rng);
    cfg.mode = attacks::AttackMode::kTargeted;
    cfg.label = models::kSoi;
    auto kind = i % 2 ? attacks::AttackKind::kFgsm : attacks::AttackKind::kPgd;
    MaliciousXapp bad(Variant::kKpm, kind, cfg, model, db);
    Tensor x = random_window(rng);
    db.put(writer, ric::kKpmKey, ric::encode_tensor(x), i);
    ASSERT_TRUE(bad.step().has_value());
    Tensor w = ric::decode_tensor(db.get_latest(reader, ric::kKpmKey).value);
    EXPECT_LE(max_abs_diff(w, x), cfg.epsilon + 1e-9);
    EXPECT_EQ(bad.gradient_evaluations(), kind == attacks::AttackKind::kFgsm ? 1u : 5u);
  }
  EXPECT_EQ(models::serialize_model(*model), before);
}

TEST(Malicious, MissingKeyIsNotFound) {
  ric::RicDatabase db;
  attacks::AttackConfig cfg;
  cfg.epsilon = 0.1;
  MaliciousXapp bad(Variant::kSpec, attacks::AttackKind::kFgsm, cfg, random_kpm_model(2), db);
  EXPECT_THROW(bad.step(), NotFound);
}

TEST(Pipeline, TrainedModelReadsCleanCwiAsJammed) {
  const auto& t = trained();
  ric::RicDatabase db;
  auto writer = db.open("ran", ric::kWrite);
  InterClassXapp app(Variant::kKpm, t.model, db);
  std::size_t cwi = 0, flagged = 0;
  for (std::size_t i = 0; i < t.test.size(); ++i) {
    if (t.test.labels[i] != models::kCwi) continue;
    db.put(writer, ric::kKpmKey, ric::encode_tensor(t.test.inputs[i]), i);
    auto d = app.step();
    ASSERT_TRUE(d.has_value());
    ++cwi;
    if (d->decision.action == ric::ControlAction::kAdaptiveMcs) ++flagged;
  }
  ASSERT_GT(cwi, 0u);
  EXPECT_GE(static_cast<double>(flagged) / cwi, 0.95);
}

// store(v) -> malicious write(v+1) -> legitimate read(v+1)
TEST(Pipeline, AttackHidesJammerFromUndefendedModel) {
  const auto& t = trained();
  ric::RicDatabase db;
  auto writer = db.open("ran", ric::kWrite);
  InterClassXapp app(Variant::kKpm, t.model, db);
  attacks::AttackConfig cfg;
  cfg.epsilon = 0.1;
  cfg.mode = attacks::AttackMode::kTargeted;
  cfg.label = models::kSoi;
  MaliciousXapp bad(Variant::kKpm, attacks::AttackKind::kPgd, cfg, t.model, db);
  std::size_t cwi = 0, hidden = 0;
  for (std::size_t i = 0; i < t.test.size(); ++i) {
    if (t.test.labels[i] != models::kCwi) continue;
    db.put(writer, ric::kKpmKey, ric::encode_tensor(t.test.inputs[i]), i);
    auto v = bad.step();
    ASSERT_TRUE(v.has_value());
    auto d = app.step();
    ASSERT_TRUE(d.has_value());
    EXPECT_EQ(d->version, *v);
    ++cwi;
    if (d->decision.action == ric::ControlAction::kFixedMaxMcs) ++hidden;
  }
  EXPECT_GE(static_cast<double>(hidden) / cwi, 0.9);
}
