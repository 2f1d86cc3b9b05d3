// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "oransim/attacks.hpp"
#include "oransim/nn.hpp"
#include "oransim/scenario.hpp"

namespace oransim::harness {

// ---------------------------------------------------------------- config

/// Flat dotted key=value configuration. '#' starts a comment; blank lines are
/// ignored; later assignments override earlier ones.
class Config {
 public:
  Config() = default;
  static Config parse(const std::string& text, const std::string& origin = "<string>");
  static Config load(const std::filesystem::path& path);

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& key, const std::vector<double>& fallback) const;

  const std::map<std::string, std::string>& values() const noexcept { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// ----------------------------------------------------------------- sweep

/// The epsilon grid used for accuracy-vs-epsilon figures.
std::vector<double> default_epsilon_grid();

struct SweepRow {
  double epsilon = 0.0;
  double accuracy = 0.0;
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;  // positive class = CWI
};

/// Attacks every test sample at each epsilon (base.label is replaced by the
/// true label for untargeted runs) and scores (TP+TN)/(TP+TN+FP+FN).
std::vector<SweepRow> accuracy_sweep(const nn::Model& model, const nn::LabeledSet& test, attacks::AttackKind kind,
                                     const std::vector<double>& epsilons, const attacks::AttackConfig& base = {});
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

// ------------------------------------------------------------------ CDFs

/// Sorted (value, cumulative fraction) pairs; ties collapse onto the last index.
std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values);
/// sup |F_a - F_b| over the pooled sample points.
double ks_distance(const std::vector<double>& a, const std::vector<double>& b);
/// Largest F_b(x) - F_a(x). <= 0 means a lies entirely right of b.
double max_cdf_excess(const std::vector<double>& a, const std::vector<double>& b);
void write_cdf_csv(const std::vector<std::pair<double, double>>& cdf, std::ostream& out);

// ---------------------------------------------------------------- timing

struct TimingBreakdown {
  std::string path;  // "spec" or "kpm"
  std::size_t samples = 0;
  double receive_data = 0.0;
  double forward_to_processing = 0.0;
  double process_and_store = 0.0;
  double model_inference = 0.0;
  double control_to_ran = 0.0;
  double total = 0.0;
  std::size_t receive_bytes = 0;  // payload size of one indication

  double stage_sum() const {
    return receive_data + forward_to_processing + process_and_store + model_inference + control_to_ran;
  }
};

/// Mean per-stage wall-clock durations. Throws Unsupported for virtual-time
/// traces and InvalidArgument for traces without decisions.
TimingBreakdown timing_report(const simnet::ScenarioTrace& trace);
void write_timing_csv(const std::vector<TimingBreakdown>& rows, std::ostream& out);

// ----------------------------------------------------------- closed loop

struct ConditionStats {
  std::string name;
  double jam_mean_throughput = 0.0;
  double jam_median_throughput = 0.0;
  double jam_mean_bler = 0.0;
  double jam_median_bler = 0.0;
  double all_mean_throughput = 0.0;
  double all_mean_bler = 0.0;
  double decision_accuracy = 0.0;  // recounted from the decision trace
  std::uint64_t decisions = 0;
  std::uint64_t perturbed_reads = 0;
  std::vector<double> jam_throughput;  // pooled over seeds
  std::vector<double> jam_bler;
  std::vector<double> all_throughput;
  std::vector<double> all_bler;
};

ConditionStats summarize(const std::string& name, const std::vector<simnet::ScenarioTrace>& traces);

struct ClosedLoopConfig {
  simnet::ScenarioConfig scenario;  // attack_enabled is set per condition
  std::vector<std::uint64_t> seeds;
  std::shared_ptr<const nn::Model> undefended;
  std::shared_ptr<const nn::Model> defended;
  std::string defense_name = "distillation";
  bool write_traces = true;  // per-seed tick and decision CSVs
};

struct ClosedLoopReport {
  ConditionStats no_attack, attacked, defended;
  double ks_defended_vs_no_attack = 0.0;         // jam-phase throughput
  double bler_attack_left_excess = 0.0;          // max_cdf_excess(attacked, no_attack), jam-phase BLER
};

/// Runs no-attack (undefended), attacked (undefended) and defended (attacked)
/// over every seed. Writes CSVs into out_dir when it is non-empty.
ClosedLoopReport run_closed_loop(const ClosedLoopConfig& cfg, const std::filesystem::path& out_dir);
void write_summary_csv(const ClosedLoopReport& report, std::ostream& out);

}  // namespace oransim::harness
