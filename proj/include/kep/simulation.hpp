// simulation.hpp
// Time-period KEP: a sequence of time-instant KEPs over a horizon, the
// per-subpopulation metrics of one run and their aggregation over
// replications.
#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kep/compatibility.hpp"
#include "kep/optimizer.hpp"
#include "kep/pool.hpp"

namespace kep {

struct SimConfig {
  double start = 0.0;            // T_0
  double horizon = 3650.0;       // T_E, days
  double match_interval = 91.25;
  int replications = 100;
  ThresholdConfig threshold;     // its paradigm drives the optimization
  /// Population scaling constant; <= 0 means the number of pairs in the pool.
  double m = 0.0;
  std::map<std::string, double> equity_weights;
  ArrivalConfig arrivals;        // seed is replaced per replication
  std::uint64_t seed = 1;
  int workers = 0;               // 0 = hardware concurrency
  /// W counts the matching run itself when true.
  bool wait_counts_matching_run = false;
  int max_cycle_length = 3;

  void validate() const;
  /// t_j = start + j * match_interval for j >= 1 while t_j <= horizon.
  std::vector<double> run_times() const;
  ObjectiveConfig objective(std::size_t pool_size) const;
};

struct PairRecord {
  PairId id = 0;
  std::string ethnicity;
  double arrival = 0.0;
  double departure = kNever;
  std::optional<int> matched_run;   // 0-based index into the run times
  std::optional<PairId> donor_pair; // pair whose donor gives to this recipient
  ArcScores scores;                 // scores of that arc
  int runs_present = 0;             // runs attended, the matching run included

  bool operator==(const PairRecord&) const = default;
};

struct RunRecord {
  int index = 0;
  double time = 0.0;
  std::size_t active = 0;
  std::size_t cycles = 0;
  std::size_t transplants = 0;
  double objective = 0.0;
};

struct EventLog {
  std::vector<PairRecord> pairs;  // by pair id
  std::vector<RunRecord> runs;
};

/// Runs every time-instant KEP for one replication. `graph` must contain a
/// node for every pair; `pairs` carry the arrival and departure times.
EventLog run_simulation(const CompatibilityGraph& graph, std::span<const Pair> pairs,
                        const SimConfig& cfg);

struct GroupMetrics {
  std::size_t arrivals = 0;
  std::size_t matched = 0;
  std::size_t departed = 0;
  std::size_t remaining_count = 0;
  // Undefined (empty) when the group had no arrivals, or no matches for HLA and W.
  std::optional<double> F;
  std::optional<double> L;
  std::optional<double> remaining;
  std::optional<double> W;
  std::array<std::optional<double>, 3> hla;  // raw mean score by paradigm
};

struct RunMetrics {
  std::map<std::string, GroupMetrics> groups;
  GroupMetrics overall;
};

/// `labels` must cover every ethnicity in the log; labels without arrivals
/// get undefined metrics.
RunMetrics compute_metrics(const EventLog& log, std::span<const std::string> labels,
                           const SimConfig& cfg);

/// Metric names in output order.
inline constexpr std::array<const char*, 8> kMetricNames{
    "arrivals", "F", "L", "remaining", "HLA_antigen", "HLA_allele", "HLA_eplet", "W"};
std::optional<double> metric_value(const GroupMetrics& g, std::string_view metric);

struct Statistic {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> sd;        // sample SD, n >= 2
  std::optional<double> ci_low;    // mean -/+ 1.96 SD / sqrt(n), n >= 2
  std::optional<double> ci_high;
};

/// Mean, sample SD and normal 95% interval of the values.
Statistic summarize(std::span<const double> values);

inline constexpr const char* kOverallLabel = "ALL";

struct ReplicationSummary {
  int replications = 0;
  std::vector<std::string> groups;  // kOverallLabel first
  std::map<std::string, std::map<std::string, Statistic>> stats;
  /// True when the group mean lies outside the population interval.
  std::map<std::string, std::map<std::string, bool>> significant;

  const Statistic* find(const std::string& group, const std::string& metric) const;
};

ReplicationSummary aggregate_replications(std::span<const RunMetrics> runs,
                                          std::span<const std::string> labels);

/// Sorted distinct ethnicities of the pairs.
std::vector<std::string> ethnicity_labels(std::span<const Pair> pairs);

struct Replication {
  int index = 0;
  EventLog log;
  RunMetrics metrics;
};

/// Where each replication takes its pairs from. With a population spec the
/// pairs are regenerated per replication; otherwise the fixed pool is reused
/// and only the times are resampled.
struct PoolSource {
  std::vector<Pair> pool;
  std::optional<PoolSpec> regenerate;
  const HlaTables* tables = nullptr;
  /// Reused for the fixed pool when set; must match cfg.threshold.
  const CompatibilityGraph* graph = nullptr;
  /// False keeps the pool's own times (every replication is then identical).
  bool resample_times = true;
};

/// Runs cfg.replications replications on cfg.workers threads. Replication r
/// draws its times from derive_seed(cfg.seed, r), so results do not depend on
/// the worker count. `labels` empty means the labels of the pool.
std::vector<Replication> run_replications(const PoolSource& source, const SimConfig& cfg,
                                          std::vector<std::string> labels = {});

struct CorrelationRow {
  PairId from = 0;
  PairId to = 0;
  ArcScores scores;
};

/// One row per arc of the graph.
std::vector<CorrelationRow> export_paradigm_correlation(const CompatibilityGraph& graph);

}  // namespace kep
