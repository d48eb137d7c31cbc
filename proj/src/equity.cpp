// equity.cpp
#include "kep/equity.hpp"

#include <algorithm>
#include <cmath>

#include "kep/error.hpp"

namespace kep {

double equity_gap(double size, double f_s, double f_p, double hla_s, double hla_p, double m) {
  return size / m * ((f_s - f_p) + (hla_s - hla_p) / m);
}

EquityInputs EquityInputs::from_summary(const ReplicationSummary& summary, Paradigm paradigm,
                                        double m) {
  const std::string hla_metric = "HLA_" + std::string(paradigm_name(paradigm));
  auto mean = [&](const std::string& group, const std::string& metric) -> std::optional<double> {
    const Statistic* s = summary.find(group, metric);
    if (!s) return std::nullopt;
    return s->mean;
  };
  auto group = [&](const std::string& label) {
    Group g;
    g.arrivals = mean(label, "arrivals");
    g.F = mean(label, "F");
    g.hla = mean(label, hla_metric);
    return g;
  };
  EquityInputs in;
  in.m = m;
  in.overall = group(kOverallLabel);
  for (const auto& label : summary.groups) {
    if (label != kOverallLabel) in.groups[label] = group(label);
  }
  return in;
}

double equity_gap(const EquityInputs& in, const std::string& group) {
  const auto it = in.groups.find(group);
  if (it == in.groups.end()) throw EmptySubpopulation("unknown subpopulation '" + group + "'");
  const auto& g = it->second;
  if (!g.arrivals || *g.arrivals <= 0.0 || !g.F || !g.hla) {
    throw EmptySubpopulation("subpopulation '" + group + "' has no arrivals or no matches");
  }
  if (!in.overall.F || !in.overall.hla) {
    throw EmptySubpopulation("population has no arrivals or no matches");
  }
  return equity_gap(*g.arrivals, *g.F, *in.overall.F, *g.hla, *in.overall.hla, in.m);
}

double total_inequity(const EquityInputs& in, std::span<const std::string> targets) {
  if (targets.empty()) throw PreconditionError("target set is empty");
  double total = 0.0;
  for (const auto& s : targets) total += std::abs(equity_gap(in, s));
  return total;
}

std::optional<double> equity_score(const EquityInputs::Group& g, double m) {
  if (!g.F || !g.hla) return std::nullopt;
  return *g.F + *g.hla / m;
}

std::vector<std::string> default_targets(const EquityInputs& in, double min_share) {
  std::vector<std::string> out;
  const double total = in.overall.arrivals.value_or(0.0);
  for (const auto& [label, g] : in.groups) {
    if (total > 0.0 && g.arrivals && *g.arrivals / total >= min_share) out.push_back(label);
  }
  return out;
}

std::string_view search_status_name(SearchStatus status) {
  switch (status) {
    case SearchStatus::Equitable: return "equitable";
    case SearchStatus::Converged: return "converged";
    case SearchStatus::MaxIterations: return "max_iterations";
  }
  return "?";
}

void SearchConfig::validate() const {
  if (!(increment > 0.0) || !std::isfinite(increment)) {
    throw PreconditionError("increment must be positive");
  }
  if (max_iterations < 1) throw PreconditionError("max_iterations must be at least 1");
  if (!(m > 0.0)) throw PreconditionError("m must be positive");
  for (const auto& t : targets) {
    if (std::find(labels.begin(), labels.end(), t) == labels.end()) {
      throw PreconditionError("target '" + t + "' is not a subpopulation label");
    }
  }
}

SearchResult rawlsian_weight_search(const WeightEvaluator& evaluate, const SearchConfig& cfg) {
  cfg.validate();
  constexpr double kTol = 1e-12;

  std::map<std::string, double> weights;
  for (const auto& l : cfg.labels) weights[l] = 1.0;
  std::vector<std::string> targets = cfg.targets;
  std::map<std::string, bool> raised;

  SearchResult result;
  result.status = SearchStatus::MaxIterations;
  for (int it = 0;; ++it) {
    const EquityInputs in = EquityInputs::from_summary(evaluate(weights), cfg.paradigm, cfg.m);
    if (it == 0 && targets.empty()) {
      targets = default_targets(in, cfg.min_share);
      if (targets.empty()) throw PreconditionError("no subpopulation qualifies as a target");
    }

    SearchRow row;
    row.iteration = it;
    row.weights = weights;
    row.total = total_inequity(in, targets);
    row.f_population = in.overall.F.value_or(0.0);
    const auto pop_score = equity_score(in.overall, cfg.m);
    row.scores[kOverallLabel] = pop_score;
    for (const auto& t : targets) {
      row.scores[t] = equity_score(in.groups.at(t), cfg.m);
      row.gaps[t] = equity_gap(in, t);
    }
    if (it == 0 || row.total < result.best_total) {
      result.best_total = row.total;
      result.best_weights = weights;
      result.best_iteration = it;
    }
    result.trace.push_back(row);
    result.iterations = it;

    // Deviations of the raw scores from the population score.
    double worst_negative = 0.0;
    std::string lowest;
    double lowest_score = 0.0;
    for (const auto& t : targets) {
      const double dev = *row.scores[t] - *pop_score;
      if (dev < -kTol) worst_negative = std::max(worst_negative, -dev);
      if (lowest.empty() || *row.scores[t] < lowest_score) {
        lowest = t;
        lowest_score = *row.scores[t];
      }
    }
    if (worst_negative == 0.0) {
      result.status = it == 0 ? SearchStatus::Equitable : SearchStatus::Converged;
      break;
    }
    bool overshoot = false;
    for (const auto& t : targets) {
      const double dev = *row.scores[t] - *pop_score;
      if (raised[t] && dev > kTol && dev > worst_negative) overshoot = true;
    }
    if (overshoot) {
      result.status = SearchStatus::Converged;
      break;
    }
    if (it == cfg.max_iterations) break;
    weights[lowest] += cfg.increment;
    raised[lowest] = true;
  }
  return result;
}

}  // namespace kep
