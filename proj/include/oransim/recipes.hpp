// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "oransim/datagen.hpp"
#include "oransim/distill.hpp"
#include "oransim/harness.hpp"
#include "oransim/scenario.hpp"
#include "oransim/xapps.hpp"

namespace oransim::harness {

// Everything needed to rebuild one variant's datasets and models.
struct Recipe {
  xapps::Variant variant = xapps::Variant::kSpec;
  std::uint64_t seed = 1;
  datagen::DatasetCounts counts;
  datagen::DatasetOptions data;
  double train_fraction = 0.8;
  nn::TrainConfig train;
  distill::DistillConfig distill;  // learning rates already scaled by the teacher temperature
  distill::AdvTrainConfig advtrain;
};

datagen::DatasetKind dataset_kind(xapps::Variant v);

/// Desk-scale defaults.
Recipe default_recipe(xapps::Variant v, std::uint64_t seed);

/// Defaults overridden by config keys:
///   data.soi data.cwi data.scale(desk|full) data.train_fraction
///   signal.snr_db signal.tone_ref_scale spectrogram.dynamic_range_decades
///   kpm.t kpm.collection(fixed|random|loop) kpm.collection_mcs
///   train.lr train.epochs train.batch
///   distill.teacher_T distill.kl_T distill.alpha distill.epochs distill.base_lr
///   advtrain.eps advtrain.ratio advtrain.warmup advtrain.attack
Recipe recipe_from_config(const Config& cfg, xapps::Variant v, std::uint64_t seed);

/// Scenario defaults overridden by:
///   schedule.total_s schedule.clean_s schedule.jam_s schedule.jam_gain_db
///   schedule.kpm_interval_ms schedule.iq_interval_ms schedule.tick_ms
///   attack.kind attack.eps attack.steps attack.step_size attack.start_s
///   racy.grad_eval_ms racy.read_delay_lo_ms racy.read_delay_hi_ms
///   loop.time_scale
/// Signal, spectrogram and KPM settings follow the recipe so the loop sees the
/// same data distribution the models were trained on.
simnet::ScenarioConfig scenario_from_config(const Config& cfg, const Recipe& recipe);

}  // namespace oransim::harness
