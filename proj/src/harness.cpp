// SPDX-License-Identifier: Apache-2.0
#include "oransim/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include <spdlog/spdlog.h>

#include "oransim/errors.hpp"
#include "oransim/models.hpp"

namespace oransim::harness {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw InvalidArgument("config key '" + key + "': not a number: " + v);
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------- config

Config Config::parse(const std::string& text, const std::string& origin) {
  Config c;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidArgument(origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw InvalidArgument(origin + ":" + std::to_string(lineno) + ": empty key");
    c.values_[key] = trim(line.substr(eq + 1));
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw InvalidArgument("missing required config key '" + key + "'");
  return it->second;
}

double Config::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : to_double(key, it->second);
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t out = 0;
  const auto& v = it->second;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw InvalidArgument("config key '" + key + "': not an integer: " + v);
  return out;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& v = it->second;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw InvalidArgument("config key '" + key + "': not a boolean: " + v);
}

std::vector<double> Config::get_doubles(const std::string& key, const std::vector<double>& fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::vector<double> out;
  std::stringstream ss(it->second);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw InvalidArgument("config key '" + key + "': empty list");
  return out;
}

// ----------------------------------------------------------------- sweep

std::vector<double> default_epsilon_grid() {
  std::vector<double> g;
  for (int i = 1; i <= 10; ++i) g.push_back(i / 100.0);
  return g;
}

std::vector<SweepRow> accuracy_sweep(const nn::Model& model, const nn::LabeledSet& test, attacks::AttackKind kind,
                                     const std::vector<double>& epsilons, const attacks::AttackConfig& base) {
  if (test.empty()) throw InvalidArgument("accuracy_sweep: empty test set");
  if (epsilons.empty()) throw InvalidArgument("accuracy_sweep: empty epsilon list");
  std::vector<SweepRow> rows;
  for (double eps : epsilons) {
    SweepRow row;
    row.epsilon = eps;
    for (std::size_t i = 0; i < test.size(); ++i) {
      std::size_t pred = 0;
      if (eps == 0.0) {
        pred = models::predict(model, test.inputs[i]).label;
      } else {
        attacks::AttackConfig cfg = base;
        cfg.epsilon = eps;
        if (cfg.mode == attacks::AttackMode::kUntargeted) cfg.label = test.labels[i];
        pred = models::predict(model, attacks::run_attack(kind, model, test.inputs[i], cfg).x_adv).label;
      }
      const bool pos = test.labels[i] == models::kCwi;
      const bool said_pos = pred == models::kCwi;
      if (pos && said_pos) ++row.tp;
      else if (!pos && !said_pos) ++row.tn;
      else if (said_pos) ++row.fp;
      else ++row.fn;
    }
    row.accuracy = static_cast<double>(row.tp + row.tn) / static_cast<double>(test.size());
    spdlog::debug("sweep {} eps={} acc={}", attacks::to_string(kind), eps, row.accuracy);
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
  out << "epsilon,accuracy,tp,tn,fp,fn\n";
  for (const auto& r : rows) {
    out << fmt("%.4f", r.epsilon) << ',' << fmt("%.6f", r.accuracy) << ',' << r.tp << ',' << r.tn << ',' << r.fp
        << ',' << r.fn << '\n';
  }
}

// ------------------------------------------------------------------ CDFs

std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
    out.emplace_back(values[i], static_cast<double>(i + 1) / n);
  }
  return out;
}

namespace {

// F(x) for a sorted sample.
double cdf_at(const std::vector<double>& sorted, double x) {
  return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin()) /
         static_cast<double>(sorted.size());
}

template <typename F>
double scan_pooled(std::vector<double> a, std::vector<double> b, F f) {
  if (a.empty() || b.empty()) throw InvalidArgument("CDF comparison needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double best = -1.0;
  for (const auto* s : {&a, &b}) {
    for (double x : *s) best = std::max(best, f(cdf_at(a, x), cdf_at(b, x)));
  }
  return best;
}

}  // namespace

double ks_distance(const std::vector<double>& a, const std::vector<double>& b) {
  return scan_pooled(a, b, [](double fa, double fb) { return std::abs(fa - fb); });
}

double max_cdf_excess(const std::vector<double>& a, const std::vector<double>& b) {
  return scan_pooled(a, b, [](double fa, double fb) { return fa - fb; });
}

void write_cdf_csv(const std::vector<std::pair<double, double>>& cdf, std::ostream& out) {
  out << "value,cdf\n";
  for (const auto& [v, f] : cdf) out << fmt("%.6f", v) << ',' << fmt("%.6f", f) << '\n';
}

// ---------------------------------------------------------------- timing

TimingBreakdown timing_report(const simnet::ScenarioTrace& trace) {
  if (!trace.wall_clock()) throw Unsupported("timing_report needs a live-mode trace; virtual time is not wall time");
  if (trace.decisions.empty()) throw InvalidArgument("timing_report: trace has no decisions");
  TimingBreakdown t;
  t.path = xapps::to_string(trace.variant);
  for (const auto& d : trace.decisions) {
    const auto& s = d.times;
    t.receive_data += s.received - s.sent;
    t.forward_to_processing += s.forwarded - s.received;
    t.process_and_store += s.stored - s.forwarded;
    t.model_inference += s.inferred - s.stored;
    t.control_to_ran += s.acked - s.inferred;
    t.total += s.acked - s.sent;
  }
  const double n = static_cast<double>(trace.decisions.size());
  t.samples = trace.decisions.size();
  t.receive_data /= n;
  t.forward_to_processing /= n;
  t.process_and_store /= n;
  t.model_inference /= n;
  t.control_to_ran /= n;
  t.total /= n;
  t.receive_bytes = trace.decisions.front().payload_bytes;
  return t;
}

void write_timing_csv(const std::vector<TimingBreakdown>& rows, std::ostream& out) {
  out << "path,samples,receive_bytes,receive_data_ms,forward_to_processing_ms,process_and_store_ms,"
         "model_inference_ms,control_to_ran_ms,total_ms\n";
  for (const auto& r : rows) {
    out << r.path << ',' << r.samples << ',' << r.receive_bytes << ',' << fmt("%.4f", r.receive_data) << ','
        << fmt("%.4f", r.forward_to_processing) << ',' << fmt("%.4f", r.process_and_store) << ','
        << fmt("%.4f", r.model_inference) << ',' << fmt("%.4f", r.control_to_ran) << ',' << fmt("%.4f", r.total)
        << '\n';
  }
}

// ----------------------------------------------------------- closed loop

namespace {

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  out << content;
  if (!out) throw IoError("write failed for " + p.string());
}

}  // namespace

ConditionStats summarize(const std::string& name, const std::vector<simnet::ScenarioTrace>& traces) {
  ConditionStats s;
  s.name = name;
  std::uint64_t correct = 0;
  for (const auto& tr : traces) {
    for (const auto& r : tr.ticks) {
      s.all_throughput.push_back(r.throughput_mbps);
      s.all_bler.push_back(r.bler);
      if (r.jammed) {
        s.jam_throughput.push_back(r.throughput_mbps);
        s.jam_bler.push_back(r.bler);
      }
    }
    for (const auto& d : tr.decisions) correct += (d.predicted == models::kCwi) == d.truth_jammed;
    s.decisions += tr.decisions.size();
    s.perturbed_reads += tr.perturbed_reads;
  }
  s.jam_mean_throughput = mean(s.jam_throughput);
  s.jam_median_throughput = median(s.jam_throughput);
  s.jam_mean_bler = mean(s.jam_bler);
  s.jam_median_bler = median(s.jam_bler);
  s.all_mean_throughput = mean(s.all_throughput);
  s.all_mean_bler = mean(s.all_bler);
  s.decision_accuracy = s.decisions ? static_cast<double>(correct) / static_cast<double>(s.decisions) : 0.0;
  return s;
}

ClosedLoopReport run_closed_loop(const ClosedLoopConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.seeds.empty()) throw InvalidArgument("run_closed_loop: no seeds");
  if (!cfg.undefended || !cfg.defended) throw InvalidArgument("run_closed_loop: both models are required");
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  struct Cond {
    std::string name;
    bool attack;
    std::shared_ptr<const nn::Model> model;
  };
  const std::vector<Cond> conds = {{"no_attack", false, cfg.undefended},
                                   {"attacked", true, cfg.undefended},
                                   {"defended", true, cfg.defended}};
  std::vector<ConditionStats> stats;
  for (const auto& c : conds) {
    simnet::ScenarioConfig sc = cfg.scenario;
    sc.attack_enabled = c.attack;
    std::vector<simnet::ScenarioTrace> traces;
    for (auto seed : cfg.seeds) {
      try {
        traces.push_back(simnet::run_scenario(sc, c.model, seed));
      } catch (const std::exception& e) {
        throw IoError("condition " + c.name + " seed " + std::to_string(seed) + ": " + e.what());
      }
      if (!out_dir.empty() && cfg.write_traces) {
        std::ostringstream ticks, decisions;
        simnet::write_tick_csv(traces.back(), ticks);
        simnet::write_decision_csv(traces.back(), decisions);
        const std::string stem = c.name + "_seed" + std::to_string(seed);
        write_file(out_dir / ("trace_" + stem + ".csv"), ticks.str());
        write_file(out_dir / ("decisions_" + stem + ".csv"), decisions.str());
      }
    }
    stats.push_back(summarize(c.name, traces));
    spdlog::info("closed loop {}: jam throughput {:.3f} Mbps, jam BLER {:.3f}, decision accuracy {:.3f}", c.name,
                 stats.back().jam_mean_throughput, stats.back().jam_mean_bler, stats.back().decision_accuracy);
  }

  ClosedLoopReport rep{stats[0], stats[1], stats[2], 0.0, 0.0};
  rep.ks_defended_vs_no_attack = ks_distance(rep.defended.jam_throughput, rep.no_attack.jam_throughput);
  rep.bler_attack_left_excess = max_cdf_excess(rep.attacked.jam_bler, rep.no_attack.jam_bler);

  if (!out_dir.empty()) {
    for (const auto* s : {&rep.no_attack, &rep.attacked, &rep.defended}) {
      const std::pair<const char*, const std::vector<double>*> series[] = {{"throughput_jam", &s->jam_throughput},
                                                                           {"bler_jam", &s->jam_bler},
                                                                           {"throughput_all", &s->all_throughput},
                                                                           {"bler_all", &s->all_bler}};
      for (const auto& [tag, values] : series) {
        std::ostringstream os;
        write_cdf_csv(empirical_cdf(*values), os);
        write_file(out_dir / ("cdf_" + s->name + "_" + tag + ".csv"), os.str());
      }
    }
    std::ostringstream os;
    write_summary_csv(rep, os);
    write_file(out_dir / "summary.csv", os.str());
  }
  return rep;
}

void write_summary_csv(const ClosedLoopReport& report, std::ostream& out) {
  out << "condition,jam_mean_throughput_mbps,jam_median_throughput_mbps,jam_mean_bler,jam_median_bler,"
         "all_mean_throughput_mbps,all_mean_bler,decision_accuracy,decisions,perturbed_reads\n";
  for (const auto* s : {&report.no_attack, &report.attacked, &report.defended}) {
    out << s->name << ',' << fmt("%.6f", s->jam_mean_throughput) << ',' << fmt("%.6f", s->jam_median_throughput)
        << ',' << fmt("%.6f", s->jam_mean_bler) << ',' << fmt("%.6f", s->jam_median_bler) << ','
        << fmt("%.6f", s->all_mean_throughput) << ',' << fmt("%.6f", s->all_mean_bler) << ','
        << fmt("%.6f", s->decision_accuracy) << ',' << s->decisions << ',' << s->perturbed_reads << '\n';
  }
  out << "ks_defended_vs_no_attack_throughput_jam," << fmt("%.6f", report.ks_defended_vs_no_attack) << "\n";
  out << "max_bler_cdf_excess_attacked_over_no_attack_jam," << fmt("%.6f", report.bler_attack_left_excess) << "\n";
}

}  // namespace oransim::harness
