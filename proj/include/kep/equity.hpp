// equity.hpp
// Equity gaps between subpopulations and the population, and the weight
// search that raises the worst-off subpopulation step by step.
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kep/simulation.hpp"

namespace kep {

/// (size / m) * [(F_s - F_P) + (HLA_s - HLA_P) / m].
double equity_gap(double size, double f_s, double f_p, double hla_s, double hla_p, double m);

/// Mean arrivals, F and HLA (raw, one paradigm) of every group.
struct EquityInputs {
  struct Group {
    std::optional<double> arrivals;
    std::optional<double> F;
    std::optional<double> hla;
  };
  std::map<std::string, Group> groups;
  Group overall;
  double m = 1.0;

  static EquityInputs from_summary(const ReplicationSummary& summary, Paradigm paradigm,
                                   double m);
};

/// Throws EmptySubpopulation when the group has no arrivals or its F or HLA
/// is undefined.
double equity_gap(const EquityInputs& in, const std::string& group);

/// Sum of |gap| over `targets`, which must be non-empty.
double total_inequity(const EquityInputs& in, std::span<const std::string> targets);

/// F + HLA / m; the score the search compares.
std::optional<double> equity_score(const EquityInputs::Group& g, double m);

/// Groups whose mean share of arrivals is at least `min_share`.
std::vector<std::string> default_targets(const EquityInputs& in, double min_share = 0.02);

struct SearchRow {
  int iteration = 0;
  std::map<std::string, double> weights;
  std::map<std::string, std::optional<double>> scores;  // targets and kOverallLabel
  std::map<std::string, std::optional<double>> gaps;    // targets
  double total = 0.0;
  double f_population = 0.0;
};

enum class SearchStatus { Equitable, Converged, MaxIterations };
std::string_view search_status_name(SearchStatus status);

struct SearchResult {
  std::map<std::string, double> best_weights;
  double best_total = 0.0;
  int best_iteration = 0;
  int iterations = 0;  // weight updates performed
  SearchStatus status = SearchStatus::MaxIterations;
  std::vector<SearchRow> trace;  // iterations + 1 rows
};

struct SearchConfig {
  std::vector<std::string> targets;  // empty: default_targets of the baseline
  std::vector<std::string> labels;   // every group; weights are reported for all
  double increment = 0.001;
  int max_iterations = 50;
  double min_share = 0.02;
  Paradigm paradigm = Paradigm::Antigen;
  double m = 1.0;

  void validate() const;
};

/// Evaluates one weight vector, normally a full replication batch with fixed
/// seeds.
using WeightEvaluator = std::function<ReplicationSummary(const std::map<std::string, double>&)>;

/// Starts from unit weights. Each step raises the target with the lowest
/// F + HLA / m by `increment`. Stops when every target is at or above the
/// population score, or when a raised target's positive deviation from the
/// population score exceeds every remaining negative deviation (raw score
/// deviations), or after max_iterations updates. Returns the weights with
/// the lowest total inequity seen.
SearchResult rawlsian_weight_search(const WeightEvaluator& evaluate, const SearchConfig& cfg);

}  // namespace kep
