// experiment.hpp
// Experiment configuration and the commands of the kepsim tool. Every
// command writes its outputs plus a manifest into the output directory.
#pragma once

#include <optional>
#include <ostream>
#include <string>

#include "kep/error.hpp"
#include "kep/io.hpp"

namespace kep {

struct ExperimentPaths {
  std::string pool;            // pool JSON; empty: generate from population
  std::string population;      // population spec JSON
  std::string antigen_map;
  std::string eplet_registry;
  std::string output = "out";
  std::string weights;         // optional weights JSON for simulate
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  ExperimentPaths paths;
  Paradigm paradigm = Paradigm::Antigen;
  std::string loci = "full";
  std::optional<int> min_score;  // default: the paradigm and loci default
  SimConfig sim;
  bool regenerate_population = false;
  bool resample_times = true;
  double increment = 0.001;
  int max_iterations = 50;
  std::vector<std::string> targets;  // empty: groups with >= min_share of arrivals
  double min_share = 0.02;

  /// Relative paths are resolved against `base_dir`. Unknown keys are errors.
  /// Call finalize() after applying any overrides.
  static ExperimentConfig from_json(const io::Json& json, const std::string& base_dir = "");
  static ExperimentConfig load(const std::string& path);
  /// Resolved configuration; `workers` is left out since it never changes
  /// the outputs.
  io::Json to_json() const;
  /// Rebuilds sim.threshold from paradigm, loci and min_score and validates.
  /// The commands below expect a finalized config.
  void finalize();
};

/// Writes <out>/pool.json, pool.csv and manifest_generate-pool.json.
void cmd_generate_pool(const ExperimentConfig& cfg, std::ostream& log);
/// Writes <out>/graph.json.
void cmd_build_graph(const ExperimentConfig& cfg, std::ostream& log);
/// Writes metrics.csv, summary.json, events.jsonl and runs.json.
void cmd_simulate(const ExperimentConfig& cfg, std::ostream& log);
/// Writes trace.csv, weights.json and equity_summary.json.
void cmd_equity_search(const ExperimentConfig& cfg, std::ostream& log);
/// Writes correlation.csv.
void cmd_fig_data(const ExperimentConfig& cfg, std::ostream& log);
/// Renders <out>/summary.json as a table into report.txt and `log`.
void cmd_report(const ExperimentConfig& cfg, std::ostream& log);

/// Exit code for an error class: 2 config, 3 data, 4 runtime.
int exit_code_of(ErrorClass cls);
io::Json error_json(const Error& err);

}  // namespace kep
