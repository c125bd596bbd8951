#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kfed/datasets.hpp"
#include "kfed/federation.hpp"

namespace kfed {

enum class Experiment { sample_size, gamma, agents };

std::string to_string(Experiment e);
Experiment experiment_from_string(const std::string& s);

struct RunConfig {
  Experiment experiment = Experiment::sample_size;
  SyntheticSpec synthetic;
  /// Accelerometer file; when set it replaces the synthetic generator.
  std::string data_path;
  std::string label_map;
  double test_fraction = 0.3;
  GridSpec grid;
  Hyperparams hp{.gamma = 25.0, .epsilon = 0.01, .eta = 0.1, .max_iters = 1000, .grad_tol = 1e-5};
  /// Values given for gamma / n / agents. The swept list supplies the rows (defaults apply
  /// when it is empty); a non-swept list may hold one value, which replaces hp.gamma,
  /// synthetic.n or synthetic.k_subspaces.
  std::vector<double> gamma_list;
  std::vector<double> n_list;
  std::vector<double> agents_list;
  int repetitions = 20;
  std::uint64_t base_seed = 1;
  std::string out_path;
  /// Stop each solve at grad_tol instead of running exactly max_iters.
  bool early_stop = false;
  /// Worker threads for repetitions; output does not depend on it.
  int jobs = 1;

  void validate() const;
  std::vector<double> sweep_values() const;
  /// Copy with the sweep value and the fixed values written into hp / synthetic.
  RunConfig at(double sweep_value) const;

  /// Flat key=value view; keys match the CLI long flags.
  std::map<std::string, std::string> to_map() const;
  /// Unknown keys raise InputError.
  void apply(const std::string& key, const std::string& value);
};

/// key=value lines, '#' comments; a file starting with '{' is read as a JSON sidecar.
RunConfig load_config(const std::string& path);

struct RunOutcome {
  double fed_accuracy = 0.0;
  double cen_accuracy = 0.0;
  double fed_communication = 0.0;
  double cen_communication = 0.0;
  double fed_representation = 0.0;
  double cen_representation = 0.0;
};

struct SweepRow {
  double value = 0.0;
  double fed_acc_mean = 0.0;
  double fed_acc_std = 0.0;
  double cen_acc_mean = 0.0;
  double cen_acc_std = 0.0;
  double fed_comm_mean = 0.0;
  double cen_comm_mean = 0.0;
  double fed_rep_mean = 0.0;
  double cen_rep_mean = 0.0;
  int repetitions = 0;
  int failures = 0;
  std::vector<std::uint64_t> seeds;
  /// Per-repetition outcomes in seed order (not serialized).
  std::vector<RunOutcome> runs;

  bool operator==(const SweepRow& o) const;
};

/// One repetition of both learners at a single sweep point.
RunOutcome run_once(const RunConfig& cfg, double sweep_value, std::uint64_t seed);

std::vector<SweepRow> sweep_sample_size(const RunConfig& cfg);
std::vector<SweepRow> sweep_gamma(const RunConfig& cfg);
std::vector<SweepRow> sweep_agents(const RunConfig& cfg);
std::vector<SweepRow> run_sweep(const RunConfig& cfg);

std::string sweep_csv(const std::vector<SweepRow>& table);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

/// Throws IoError unless a file can be created next to `path`.
void check_output_path(const std::string& path);
/// CSV via write-temp-rename, plus `<path>.json` holding the full config.
void emit_outputs(const std::vector<SweepRow>& table, const RunConfig& cfg,
                  const std::string& path);

}  // namespace kfed
