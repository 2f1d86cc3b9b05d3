// SPDX-License-Identifier: Apache-2.0
#include "oransim/recipes.hpp"

#include "oransim/errors.hpp"

namespace oransim::harness {

datagen::DatasetKind dataset_kind(xapps::Variant v) {
  return v == xapps::Variant::kSpec ? datagen::DatasetKind::kSpectrogram : datagen::DatasetKind::kKpm;
}

namespace {

nn::TrainConfig train_cfg(double lr, std::size_t epochs, std::uint64_t seed) {
  nn::TrainConfig t;
  t.learning_rate = lr;
  t.epochs = epochs;
  t.batch_size = 32;
  t.seed = seed;
  return t;
}

void set_distill(Recipe& r, double base_lr, std::size_t epochs) {
  r.distill.teacher_cfg = train_cfg(base_lr * r.distill.teacher_T, epochs, r.seed + 101);
  r.distill.student_cfg = train_cfg(base_lr * r.distill.teacher_T, epochs, r.seed + 202);
}

}  // namespace

Recipe default_recipe(xapps::Variant v, std::uint64_t seed) {
  Recipe r;
  r.variant = v;
  r.seed = seed;
  r.counts = datagen::default_counts(dataset_kind(v));
  if (v == xapps::Variant::kSpec) {
    r.train = train_cfg(0.05, 4, seed);
  } else {
    r.train = train_cfg(0.05, 20, seed);
  }
  set_distill(r, r.train.learning_rate, r.train.epochs);
  r.advtrain.train_cfg = r.train;
  r.advtrain.train_cfg.seed = seed + 303;
  return r;
}

Recipe recipe_from_config(const Config& cfg, xapps::Variant v, std::uint64_t seed) {
  Recipe r = default_recipe(v, seed);
  const auto kind = dataset_kind(v);
  const std::string scale = cfg.get("data.scale", "desk");
  if (scale == "full") {
    r.counts = datagen::full_counts(kind);
  } else if (scale != "desk") {
    throw InvalidArgument("data.scale must be desk or full, got '" + scale + "'");
  }
  r.counts.soi = static_cast<std::size_t>(cfg.get_int("data.soi", static_cast<std::int64_t>(r.counts.soi)));
  r.counts.cwi = static_cast<std::size_t>(cfg.get_int("data.cwi", static_cast<std::int64_t>(r.counts.cwi)));
  r.train_fraction = cfg.get_double("data.train_fraction", r.train_fraction);
  if (!(r.train_fraction > 0.0 && r.train_fraction < 1.0)) throw InvalidArgument("data.train_fraction must be in (0,1)");

  auto& d = r.data;
  d.signal.snr_db = cfg.get_double("signal.snr_db", d.signal.snr_db);
  d.signal.tone_ref_scale = cfg.get_double("signal.tone_ref_scale", d.signal.tone_ref_scale);
  d.spectrogram.dynamic_range_decades =
      cfg.get_double("spectrogram.dynamic_range_decades", d.spectrogram.dynamic_range_decades);
  d.kpm.t = static_cast<std::size_t>(cfg.get_int("kpm.t", static_cast<std::int64_t>(d.kpm.t)));
  const std::string coll = cfg.get("kpm.collection", "fixed");
  if (coll == "fixed") {
    d.kpm.collection = datagen::KpmCollection::kFixedMcs;
  } else if (coll == "random") {
    d.kpm.collection = datagen::KpmCollection::kRandomMcs;
  } else if (coll == "loop") {
    d.kpm.collection = datagen::KpmCollection::kLoopPolicies;
  } else {
    throw InvalidArgument("kpm.collection must be fixed, random or loop, got '" + coll + "'");
  }
  d.kpm.collection_mcs = static_cast<int>(cfg.get_int("kpm.collection_mcs", d.kpm.collection_mcs));

  r.train.learning_rate = cfg.get_double("train.lr", r.train.learning_rate);
  r.train.epochs = static_cast<std::size_t>(cfg.get_int("train.epochs", static_cast<std::int64_t>(r.train.epochs)));
  r.train.batch_size = static_cast<std::size_t>(cfg.get_int("train.batch", static_cast<std::int64_t>(r.train.batch_size)));
  r.train.validate();

  r.distill.teacher_T = cfg.get_double("distill.teacher_T", r.distill.teacher_T);
  r.distill.kl_T = cfg.get_double("distill.kl_T", r.distill.kl_T);
  r.distill.alpha = cfg.get_double("distill.alpha", r.distill.alpha);
  set_distill(r, cfg.get_double("distill.base_lr", r.train.learning_rate),
              static_cast<std::size_t>(cfg.get_int("distill.epochs", static_cast<std::int64_t>(r.train.epochs))));
  r.distill.teacher_cfg.batch_size = r.distill.student_cfg.batch_size = r.train.batch_size;
  r.distill.validate();

  r.advtrain.epsilon = cfg.get_double("advtrain.eps", r.advtrain.epsilon);
  r.advtrain.augmentation_ratio = cfg.get_double("advtrain.ratio", r.advtrain.augmentation_ratio);
  r.advtrain.warmup_fraction = cfg.get_double("advtrain.warmup", r.advtrain.warmup_fraction);
  r.advtrain.attack = attacks::attack_kind_from_string(cfg.get("advtrain.attack", attacks::to_string(r.advtrain.attack)));
  r.advtrain.train_cfg = r.train;
  r.advtrain.train_cfg.seed = seed + 303;
  return r;
}

simnet::ScenarioConfig scenario_from_config(const Config& cfg, const Recipe& recipe) {
  simnet::ScenarioConfig s;
  s.variant = recipe.variant;
  s.signal = recipe.data.signal;
  s.spectrogram = recipe.data.spectrogram;
  s.bounds = recipe.data.bounds;
  s.kpm_t = recipe.data.kpm.t;
  s.link = recipe.data.kpm.link;

  auto& sch = s.schedule;
  sch.total_s = cfg.get_double("schedule.total_s", sch.total_s);
  sch.clean_s = cfg.get_double("schedule.clean_s", sch.clean_s);
  sch.jam_s = cfg.get_double("schedule.jam_s", sch.total_s - sch.clean_s);
  sch.jam_gain_db = cfg.get_double("schedule.jam_gain_db", sch.jam_gain_db);
  sch.kpm_interval_ms = static_cast<std::uint64_t>(cfg.get_int("schedule.kpm_interval_ms", static_cast<std::int64_t>(sch.kpm_interval_ms)));
  sch.iq_interval_ms = static_cast<std::uint64_t>(cfg.get_int("schedule.iq_interval_ms", static_cast<std::int64_t>(sch.iq_interval_ms)));
  sch.tick_ms = static_cast<std::uint64_t>(cfg.get_int("schedule.tick_ms", static_cast<std::int64_t>(sch.tick_ms)));

  s.attack_kind = attacks::attack_kind_from_string(cfg.get("attack.kind", "pgd"));
  s.attack.epsilon = cfg.get_double("attack.eps", 0.1);
  s.attack.n_steps = static_cast<std::size_t>(cfg.get_int("attack.steps", 5));
  s.attack.step_size = cfg.get_double("attack.step_size", 0.0);
  s.attack_start_s = cfg.get_double("attack.start_s", -1.0);

  s.racy.grad_eval_ms = cfg.get_double("racy.grad_eval_ms", s.racy.grad_eval_ms);
  s.racy.read_delay_lo_ms = cfg.get_double("racy.read_delay_lo_ms", s.racy.read_delay_lo_ms);
  s.racy.read_delay_hi_ms = cfg.get_double("racy.read_delay_hi_ms", s.racy.read_delay_hi_ms);
  s.time_scale = cfg.get_double("loop.time_scale", s.time_scale);
  s.validate();
  return s;
}

}  // namespace oransim::harness
