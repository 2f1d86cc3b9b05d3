// SPDX-License-Identifier: Apache-2.0
// oransim: dataset generation, training, attack sweeps, defenses and
// closed-loop runs for the simulated O-RAN interference-classification setup.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "oransim/errors.hpp"
#include "oransim/harness.hpp"
#include "oransim/models.hpp"
#include "oransim/recipes.hpp"

using namespace oransim;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Thrown for bad user input so main() can map it to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Options {
  std::string config_path;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  std::string mode;
  std::string out;
};

harness::Config load_config(const Options& o) {
  harness::Config cfg;
  try {
    if (!o.config_path.empty()) cfg = harness::Config::load(o.config_path);
    for (const auto& kv : o.overrides) {
      auto parsed = harness::Config::parse(kv, "--set");
      for (const auto& [k, v] : parsed.values()) cfg.set(k, v);
    }
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  if (o.seed >= 0) cfg.set("seed", std::to_string(o.seed));
  if (!o.mode.empty()) cfg.set("mode", o.mode);
  if (!o.out.empty()) cfg.set("out", o.out);
  return cfg;
}

std::uint64_t seed_of(const harness::Config& c) { return static_cast<std::uint64_t>(c.get_int("seed", 1)); }
fs::path out_of(const harness::Config& c) { return c.get("out", "out"); }

xapps::Variant variant_of(const harness::Config& c) { return xapps::variant_from_string(c.get("model.variant", "spec")); }

fs::path data_dir(const harness::Config& c, xapps::Variant v) {
  return c.get("data.dir", (out_of(c) / ("data_" + xapps::to_string(v))).string());
}

void write_text(const fs::path& p, const std::string& s) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << s;
}

// Loads the variant's dataset and returns the seeded stratified split.
datagen::Split load_split(const harness::Config& c, const harness::Recipe& r) {
  const auto dir = data_dir(c, r.variant);
  auto ds = datagen::load_dataset(dir);
  if (ds.kind != harness::dataset_kind(r.variant)) {
    throw ConfigError("dataset in " + dir.string() + " is " + datagen::to_string(ds.kind) + ", expected " +
                      datagen::to_string(harness::dataset_kind(r.variant)));
  }
  return datagen::stratified_split(ds.samples, r.train_fraction, r.seed);
}

nn::Architecture arch_of(const harness::Recipe& r) {
  if (r.variant == xapps::Variant::kSpec) return models::spec_architecture();
  models::KpmDescriptor d;
  d.t = r.data.kpm.t;
  return models::kpm_architecture(d);
}

// ---------------------------------------------------------- subcommands

int cmd_gen_data(const harness::Config& c) {
  const auto v = variant_of(c);
  auto r = harness::recipe_from_config(c, v, seed_of(c));
  spdlog::info("generating {} dataset: {} SOI + {} CWI", datagen::to_string(harness::dataset_kind(v)), r.counts.soi,
               r.counts.cwi);
  auto ds = datagen::build_dataset(harness::dataset_kind(v), r.counts, r.seed, r.data);
  const auto dir = data_dir(c, v);
  datagen::write_dataset(ds, dir);
  std::cout << "wrote " << ds.samples.size() << " samples to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const harness::Config& c) {
  const auto v = variant_of(c);
  auto r = harness::recipe_from_config(c, v, seed_of(c));
  auto split = load_split(c, r);
  auto model = nn::train(nn::Model::initialized(arch_of(r), r.seed), split.train, r.train);
  const double acc = nn::accuracy(model, split.test);
  const fs::path path = c.get("model.path", (out_of(c) / (xapps::to_string(v) + "_undefended.orml")).string());
  models::save_model(model, path);
  std::cout << "held-out accuracy " << acc << " (" << split.test.size() << " samples); model " << path.string() << "\n";
  return 0;
}

int cmd_sweep(const harness::Config& c) {
  const auto v = variant_of(c);
  auto r = harness::recipe_from_config(c, v, seed_of(c));
  auto split = load_split(c, r);
  const fs::path path = c.get("model.path", (out_of(c) / (xapps::to_string(v) + "_undefended.orml")).string());
  auto model = models::load_model(path);
  auto eps = c.get_doubles("sweep.eps", harness::default_epsilon_grid());
  eps.insert(eps.begin(), 0.0);
  nn::LabeledSet test = split.test;
  if (auto limit = static_cast<std::size_t>(c.get_int("sweep.limit", 0)); limit && limit < test.size()) {
    test = datagen::stratified_split(split.test, static_cast<double>(limit) / split.test.size(), r.seed).train;
  }
  attacks::AttackConfig base;
  base.n_steps = static_cast<std::size_t>(c.get_int("sweep.steps", 5));
  const std::string mode = c.get("sweep.mode", "untargeted");
  if (mode == "targeted") {
    base.mode = attacks::AttackMode::kTargeted;
    base.label = models::kSoi;
  } else if (mode != "untargeted") {
    throw ConfigError("sweep.mode must be untargeted or targeted");
  }
  std::vector<attacks::AttackKind> kinds;
  const std::string which = c.get("sweep.attack", "both");
  if (which == "both") {
    kinds = {attacks::AttackKind::kFgsm, attacks::AttackKind::kPgd};
  } else {
    kinds = {attacks::attack_kind_from_string(which)};
  }
  const std::string tag = c.get("sweep.tag", fs::path(path).stem().string());
  for (auto k : kinds) {
    auto rows = harness::accuracy_sweep(model, test, k, eps, base);
    std::ostringstream os;
    harness::write_sweep_csv(rows, os);
    const auto file = out_of(c) / ("sweep_" + tag + "_" + attacks::to_string(k) + ".csv");
    write_text(file, os.str());
    std::cout << attacks::to_string(k) << ": accuracy at eps " << rows.back().epsilon << " = " << rows.back().accuracy
              << " -> " << file.string() << "\n";
  }
  return 0;
}

int cmd_distill(const harness::Config& c) {
  const auto v = variant_of(c);
  auto r = harness::recipe_from_config(c, v, seed_of(c));
  auto split = load_split(c, r);
  auto teacher = distill::train_teacher(arch_of(r), split.train, r.distill);
  auto student = distill::distill_student(teacher, arch_of(r), split.train, r.distill);
  const auto stem = out_of(c) / xapps::to_string(v);
  models::save_model(teacher, stem.string() + "_teacher.orml");
  models::save_model(student, stem.string() + "_distilled.orml");
  std::cout << "student held-out accuracy " << nn::accuracy(student, split.test) << "\n";
  return 0;
}

int cmd_advtrain(const harness::Config& c) {
  const auto v = variant_of(c);
  auto r = harness::recipe_from_config(c, v, seed_of(c));
  auto split = load_split(c, r);
  auto model = distill::adversarial_train(arch_of(r), split.train, r.advtrain);
  const auto path = out_of(c) / (xapps::to_string(v) + "_advtrained.orml");
  models::save_model(model, path);
  std::cout << "adversarially trained held-out accuracy " << nn::accuracy(model, split.test) << "\n";
  return 0;
}

int cmd_run_loop(const harness::Config& c) {
  const auto v = xapps::variant_from_string(c.get("loop.variant", c.get("model.variant", "spec")));
  auto r = harness::recipe_from_config(c, v, seed_of(c));
  harness::ClosedLoopConfig lc;
  lc.scenario = harness::scenario_from_config(c, r);
  const std::string mode = c.get("mode", "det");
  lc.scenario.mode = simnet::run_mode_from_string(mode);
  const auto n = c.get_int("loop.seeds", 20);
  if (n <= 0) throw ConfigError("loop.seeds must be >= 1");
  const auto base = static_cast<std::uint64_t>(c.get_int("loop.seed_base", static_cast<std::int64_t>(r.seed)));
  for (std::int64_t i = 0; i < n; ++i) lc.seeds.push_back(base + static_cast<std::uint64_t>(i));
  const std::string stem = (out_of(c) / xapps::to_string(v)).string();
  lc.defense_name = c.get("loop.defense", "distillation");
  const auto defense = xapps::defense_from_string(lc.defense_name);
  const std::string def_default = stem + (defense == xapps::Defense::kAdversarialTraining ? "_advtrained.orml"
                                                                                          : "_distilled.orml");
  lc.undefended = std::make_shared<const nn::Model>(models::load_model(c.get("loop.undefended", stem + "_undefended.orml")));
  lc.defended = defense == xapps::Defense::kNone
                    ? lc.undefended
                    : std::make_shared<const nn::Model>(models::load_model(c.get("loop.defended", def_default)));
  lc.write_traces = c.get_bool("loop.write_traces", true);
  const auto dir = out_of(c) / ("loop_" + xapps::to_string(v));
  auto rep = harness::run_closed_loop(lc, dir);
  harness::write_summary_csv(rep, std::cout);
  return 0;
}

int cmd_report(const harness::Config& c) {
  std::vector<harness::TimingBreakdown> rows;
  for (auto v : {xapps::Variant::kSpec, xapps::Variant::kKpm}) {
    auto r = harness::recipe_from_config(c, v, seed_of(c));
    auto sc = harness::scenario_from_config(c, r);
    sc.mode = simnet::RunMode::kLive;
    if (!c.has("schedule.total_s")) {
      sc.schedule.total_s = 40;
      sc.schedule.clean_s = 20;
      sc.schedule.jam_s = 20;
    }
    if (!c.has("loop.time_scale")) sc.time_scale = 4.0;
    const std::string key = "report." + xapps::to_string(v) + "_model";
    const auto path = c.get(key, (out_of(c) / (xapps::to_string(v) + "_undefended.orml")).string());
    auto model = std::make_shared<const nn::Model>(models::load_model(path));
    auto trace = simnet::run_scenario(sc, model, seed_of(c));
    rows.push_back(harness::timing_report(trace));
  }
  std::ostringstream os;
  harness::write_timing_csv(rows, os);
  write_text(out_of(c) / "timing.csv", os.str());
  std::cout << os.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* lvl = std::getenv("ORANSIM_LOG")) {
    spdlog::set_level(spdlog::level::from_str(lvl));
  } else {
    spdlog::set_level(spdlog::level::warn);
  }

  CLI::App app{"oransim: adversarial attacks and defenses on a simulated near-RT RIC"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "flat key=value config file");
  app.add_option("--set", opt.overrides, "override a config key (key=value), repeatable");
  app.add_option("--seed", opt.seed, "master seed");
  app.add_option("--mode", opt.mode, "run mode for run-loop")->check(CLI::IsMember({"det", "live", "racy"}));
  app.add_option("--out", opt.out, "output directory");

  struct Sub {
    const char* name;
    const char* help;
    int (*fn)(const harness::Config&);
  };
  const Sub subs[] = {
      {"gen-data", "build a synthetic dataset (model.variant=spec|kpm)", cmd_gen_data},
      {"train", "train the undefended classifier", cmd_train},
      {"sweep", "accuracy vs epsilon under FGSM/PGD", cmd_sweep},
      {"distill", "train a teacher at high temperature and distill a student", cmd_distill},
      {"advtrain", "adversarial training baseline", cmd_advtrain},
      {"run-loop", "closed-loop no-attack / attacked / defended runs", cmd_run_loop},
      {"report", "live-mode timing breakdown for both data paths", cmd_report},
  };
  for (const auto& s : subs) app.add_subcommand(s.name, s.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const auto cfg = load_config(opt);
    for (const auto& s : subs) {
      if (app.got_subcommand(s.name)) return s.fn(cfg);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
