// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oransim/datagen.hpp"
#include "oransim/errors.hpp"
#include "oransim/harness.hpp"
#include "oransim/models.hpp"

using namespace oransim;
using namespace oransim::harness;

namespace {

std::shared_ptr<const nn::Model> kpm_model(std::uint64_t seed) {
  auto ds = datagen::build_dataset(datagen::DatasetKind::kKpm, {300, 200}, seed);
  nn::TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.epochs = 10;
  cfg.seed = seed;
  return std::make_shared<const nn::Model>(
      nn::train(models::build_kpm_model(models::KpmDescriptor{}, seed), ds.samples, cfg));
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParsesFlatDottedKeys) {
  auto c = Config::parse("# comment\nseed = 7\nsweep.eps = 0.01, 0.05,0.1  # trailing\n\nloop.attack=true\nname=x\nname=y\n");
  EXPECT_EQ(c.get_int("seed", 0), 7);
  EXPECT_EQ(c.get_doubles("sweep.eps", {}), (std::vector<double>{0.01, 0.05, 0.1}));
  EXPECT_TRUE(c.get_bool("loop.attack", false));
  EXPECT_EQ(c.get("name", ""), "y");
  EXPECT_EQ(c.get_double("missing", 2.5), 2.5);
  EXPECT_THROW(c.require("missing"), InvalidArgument);
}

TEST(Config, RejectsMalformed) {
  EXPECT_THROW(Config::parse("novalue\n"), InvalidArgument);
  EXPECT_THROW(Config::parse("=3\n"), InvalidArgument);
  auto c = Config::parse("a=x\nb=maybe\nc=1.5\n");
  EXPECT_THROW(c.get_double("a", 0), InvalidArgument);
  EXPECT_THROW(c.get_bool("b", false), InvalidArgument);
  EXPECT_THROW(c.get_int("c", 0), InvalidArgument);
  EXPECT_THROW(Config::load("/nonexistent/oransim.cfg"), IoError);
}

TEST(Cdf, EmpiricalStepsAndTies) {
  auto cdf = empirical_cdf({3.0, 1.0, 2.0, 2.0});
  ASSERT_EQ(cdf.size(), 3u);
  EXPECT_DOUBLE_EQ(cdf[0].first, 1.0);
  EXPECT_DOUBLE_EQ(cdf[0].second, 0.25);
  EXPECT_DOUBLE_EQ(cdf[1].second, 0.75);
  EXPECT_DOUBLE_EQ(cdf[2].second, 1.0);
}

TEST(Cdf, KsDistanceOracle) {
  EXPECT_DOUBLE_EQ(ks_distance({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_DOUBLE_EQ(ks_distance({1, 2}, {3, 4}), 1.0);
  // F_a jumps to 0.5 at 1 while F_b is still 0.
  EXPECT_DOUBLE_EQ(ks_distance({1, 3}, {2, 4}), 0.5);
  EXPECT_THROW(ks_distance({}, {1}), InvalidArgument);
}

TEST(Cdf, KsIsSymmetricAndBounded) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + trial % 17), b(1 + trial % 11);
    for (auto& v : a) v = n(rng);
    for (auto& v : b) v = n(rng) + 0.5;
    const double d = ks_distance(a, b);
    EXPECT_DOUBLE_EQ(d, ks_distance(b, a));
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
  }
}

TEST(Cdf, ExcessDetectsRightShift) {
  // a shifted right of b: F_a <= F_b everywhere.
  EXPECT_LE(max_cdf_excess({2, 3, 4}, {1, 2, 3}), 0.0);
  EXPECT_GT(max_cdf_excess({1, 2, 3}, {2, 3, 4}), 0.0);
}

TEST(Sweep, ZeroEpsilonRowIsCleanAccuracy) {
  auto model = kpm_model(1);
  auto test = datagen::build_dataset(datagen::DatasetKind::kKpm, {60, 40}, 99).samples;
  auto rows = accuracy_sweep(*model, test, attacks::AttackKind::kPgd, {0.0, 0.05, 0.1});
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].accuracy, nn::accuracy(*model, test));
  for (const auto& r : rows) {
    EXPECT_EQ(r.tp + r.tn + r.fp + r.fn, test.size());
    EXPECT_DOUBLE_EQ(r.accuracy, static_cast<double>(r.tp + r.tn) / test.size());
  }
  EXPECT_THROW(accuracy_sweep(*model, nn::LabeledSet{}, attacks::AttackKind::kFgsm, {0.1}), InvalidArgument);
  std::ostringstream os;
  write_sweep_csv(rows, os);
  EXPECT_EQ(os.str().substr(0, 30), "epsilon,accuracy,tp,tn,fp,fn\n0");
}

TEST(Sweep, DefaultGridIsOneToTenPercent) {
  auto g = default_epsilon_grid();
  ASSERT_EQ(g.size(), 10u);
  EXPECT_DOUBLE_EQ(g.front(), 0.01);
  EXPECT_DOUBLE_EQ(g.back(), 0.1);
}

TEST(Timing, DeterministicTraceIsUnsupported) {
  simnet::ScenarioTrace t;
  t.mode = simnet::RunMode::kDeterministic;
  EXPECT_THROW(timing_report(t), Unsupported);
  t.mode = simnet::RunMode::kLive;
  EXPECT_THROW(timing_report(t), InvalidArgument);
}

TEST(Timing, StagesSumToTotal) {
  simnet::ScenarioTrace t;
  t.mode = simnet::RunMode::kLive;
  simnet::DecisionRecord d;
  d.times = {1.0, 3.0, 3.5, 7.0, 9.0, 12.0};
  d.payload_bytes = 20;
  t.decisions = {d, d};
  auto r = timing_report(t);
  EXPECT_DOUBLE_EQ(r.receive_data, 2.0);
  EXPECT_DOUBLE_EQ(r.model_inference, 2.0);
  EXPECT_DOUBLE_EQ(r.total, 11.0);
  EXPECT_NEAR(r.stage_sum(), r.total, 1e-12);
  EXPECT_EQ(r.receive_bytes, 20u);
}

TEST(ClosedLoop, EmitsThreeConditionsReproducibly) {
  ClosedLoopConfig cfg;
  cfg.scenario.variant = xapps::Variant::kKpm;
  cfg.scenario.attack.epsilon = 0.1;
  cfg.seeds = {0, 1};
  cfg.undefended = kpm_model(2);
  cfg.defended = kpm_model(3);
  const auto dir = std::filesystem::temp_directory_path() / "oransim_closed_loop_test";
  std::filesystem::remove_all(dir);
  auto rep = run_closed_loop(cfg, dir / "a");
  run_closed_loop(cfg, dir / "b");
  for (const char* name : {"summary.csv", "cdf_no_attack_throughput_jam.csv", "cdf_attacked_bler_jam.csv",
                           "cdf_defended_throughput_all.csv", "trace_attacked_seed1.csv", "decisions_defended_seed0.csv"}) {
    ASSERT_TRUE(std::filesystem::exists(dir / "a" / name)) << name;
    EXPECT_EQ(slurp(dir / "a" / name), slurp(dir / "b" / name)) << name;
  }
  EXPECT_EQ(rep.no_attack.jam_throughput.size(), 2u * 900u);
  EXPECT_EQ(rep.no_attack.perturbed_reads, 0u);
  EXPECT_GT(rep.attacked.perturbed_reads, 0u);
  std::filesystem::remove_all(dir);
}

TEST(ClosedLoop, SummaryAccuracyMatchesRecount) {
  simnet::ScenarioConfig sc;
  sc.variant = xapps::Variant::kKpm;
  auto tr = simnet::run_scenario(sc, kpm_model(4), 6);
  std::size_t ok = 0;
  for (const auto& d : tr.decisions) ok += (d.predicted == models::kCwi) == d.truth_jammed;
  auto s = summarize("x", {tr});
  EXPECT_DOUBLE_EQ(s.decision_accuracy, static_cast<double>(ok) / tr.decisions.size());
  EXPECT_EQ(s.decisions, tr.decisions.size());
}
