// simulation.cpp
#include "kep/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "kep/error.hpp"
#include "kep/random.hpp"

namespace kep {

void SimConfig::validate() const {
  if (!(match_interval > 0.0) || !std::isfinite(match_interval)) {
    throw PreconditionError("match_interval must be positive");
  }
  if (!std::isfinite(start) || !std::isfinite(horizon) || start + match_interval > horizon) {
    throw PreconditionError("horizon must allow at least one match run");
  }
  if (replications < 1) throw PreconditionError("replications must be at least 1");
  if (workers < 0) throw PreconditionError("workers must be non-negative");
  if (max_cycle_length < 2 || max_cycle_length > 3) {
    throw PreconditionError("max_cycle_length must be 2 or 3");
  }
  if (!std::isfinite(m) || m < 0.0) throw PreconditionError("m must be non-negative");
  threshold.validate();
  ObjectiveConfig probe = ObjectiveConfig::for_threshold(threshold, 1.0);
  probe.equity_weights = equity_weights;
  probe.validate();
}

std::vector<double> SimConfig::run_times() const {
  std::vector<double> times;
  // Multiplying instead of accumulating keeps t_j exact for the default grid.
  for (long j = 1;; ++j) {
    const double t = start + static_cast<double>(j) * match_interval;
    if (t > horizon) break;
    times.push_back(t);
  }
  return times;
}

ObjectiveConfig SimConfig::objective(std::size_t pool_size) const {
  const double scale = m > 0.0 ? m : static_cast<double>(std::max<std::size_t>(pool_size, 1));
  ObjectiveConfig obj = ObjectiveConfig::for_threshold(threshold, scale);
  obj.equity_weights = equity_weights;
  return obj;
}

// ---------------------------------------------------------------------------

EventLog run_simulation(const CompatibilityGraph& graph, std::span<const Pair> pairs,
                        const SimConfig& cfg) {
  cfg.validate();
  // Fails early with EpletsUndefined rather than inside the first run.
  max_score(cfg.threshold.paradigm, cfg.threshold.loci);

  struct Entry {
    std::uint32_t node;
    std::size_t record;
  };
  EventLog log;
  log.pairs.reserve(pairs.size());
  std::vector<Entry> entries;
  entries.reserve(pairs.size());
  for (const Pair& p : pairs) {
    if (!(p.arrival < p.departure)) {
      throw InvariantViolation("pair " + std::to_string(p.id) + " has arrival >= departure");
    }
    const auto node = graph.index_of(p.id);
    if (!node) throw PreconditionError("pair " + std::to_string(p.id) + " is not in the graph");
    PairRecord rec;
    rec.id = p.id;
    rec.ethnicity = p.ethnicity;
    rec.arrival = p.arrival;
    rec.departure = p.departure;
    entries.push_back({*node, log.pairs.size()});
    log.pairs.push_back(std::move(rec));
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.node < b.node; });
  for (std::size_t k = 1; k < entries.size(); ++k) {
    if (entries[k - 1].node == entries[k].node) {
      throw InvariantViolation("duplicate pair id " + std::to_string(graph.node_id(entries[k].node)));
    }
  }
  std::vector<std::ptrdiff_t> record_of(graph.node_count(), -1);
  for (const Entry& e : entries) record_of[e.node] = static_cast<std::ptrdiff_t>(e.record);

  Instance inst;
  inst.graph = &graph;
  inst.objective = cfg.objective(graph.node_count());
  inst.max_cycle_length = cfg.max_cycle_length;

  const auto times = cfg.run_times();
  for (std::size_t j = 0; j < times.size(); ++j) {
    const double t = times[j];
    inst.active.clear();
    for (const Entry& e : entries) {
      PairRecord& rec = log.pairs[e.record];
      if (!rec.matched_run && rec.arrival <= t && t < rec.departure) {
        inst.active.push_back(e.node);
        ++rec.runs_present;
      }
    }
    Solution sol;
    try {
      sol = solve_instant_kep(inst);
    } catch (const Error& err) {
      throw SimulationError("run " + std::to_string(j) + ": " + err.what());
    }
    RunRecord run;
    run.index = static_cast<int>(j);
    run.time = t;
    run.active = inst.active.size();
    run.cycles = sol.cycles.size();
    run.transplants = sol.transplants();
    run.objective = sol.objective;
    for (const Cycle& c : sol.cycles) {
      for (std::size_t k = 0; k < c.length; ++k) {
        const std::uint32_t u = c.members[k];
        const std::uint32_t v = c.members[(k + 1) % c.length];
        PairRecord& rec = log.pairs[static_cast<std::size_t>(record_of[v])];
        rec.matched_run = static_cast<int>(j);
        rec.donor_pair = graph.node_id(u);
        rec.scores = graph.find(u, v)->scores;
      }
    }
    log.runs.push_back(run);
  }
  std::sort(log.pairs.begin(), log.pairs.end(),
            [](const PairRecord& a, const PairRecord& b) { return a.id < b.id; });
  return log;
}

// ---------------------------------------------------------------------------

namespace {

struct Accumulator {
  std::size_t arrivals = 0, matched = 0, departed = 0;
  std::array<double, 3> hla_sum{};
  std::array<std::size_t, 3> hla_n{};
  double wait_sum = 0.0;

  void add(const PairRecord& rec, double horizon, bool count_matching_run) {
    ++arrivals;
    if (rec.matched_run) {
      ++matched;
      for (const Paradigm p : kAllParadigms) {
        if (const auto s = rec.scores.get(p)) {
          hla_sum[static_cast<int>(p)] += *s;
          ++hla_n[static_cast<int>(p)];
        }
      }
      wait_sum += rec.runs_present - (count_matching_run ? 0 : 1);
    } else if (rec.departure <= horizon) {
      ++departed;
    }
  }

  GroupMetrics finish() const {
    GroupMetrics g;
    g.arrivals = arrivals;
    g.matched = matched;
    g.departed = departed;
    g.remaining_count = arrivals - matched - departed;
    if (arrivals == 0) return g;
    const double n = static_cast<double>(arrivals);
    g.F = static_cast<double>(matched) / n;
    g.L = static_cast<double>(departed) / n;
    g.remaining = static_cast<double>(g.remaining_count) / n;
    if (matched > 0) g.W = wait_sum / static_cast<double>(matched);
    for (int p = 0; p < 3; ++p) {
      if (hla_n[p] > 0) g.hla[p] = hla_sum[p] / static_cast<double>(hla_n[p]);
    }
    return g;
  }
};

}  // namespace

RunMetrics compute_metrics(const EventLog& log, std::span<const std::string> labels,
                           const SimConfig& cfg) {
  std::map<std::string, Accumulator> acc;
  for (const auto& l : labels) acc[l];
  Accumulator all;
  for (const PairRecord& rec : log.pairs) {
    auto it = acc.find(rec.ethnicity);
    if (it == acc.end()) {
      throw PreconditionError("partition does not cover ethnicity '" + rec.ethnicity + "'");
    }
    it->second.add(rec, cfg.horizon, cfg.wait_counts_matching_run);
    all.add(rec, cfg.horizon, cfg.wait_counts_matching_run);
  }
  RunMetrics out;
  for (const auto& [label, a] : acc) out.groups[label] = a.finish();
  out.overall = all.finish();
  return out;
}

std::optional<double> metric_value(const GroupMetrics& g, std::string_view metric) {
  if (metric == "arrivals") return static_cast<double>(g.arrivals);
  if (metric == "F") return g.F;
  if (metric == "L") return g.L;
  if (metric == "remaining") return g.remaining;
  if (metric == "HLA_antigen") return g.hla[0];
  if (metric == "HLA_allele") return g.hla[1];
  if (metric == "HLA_eplet") return g.hla[2];
  if (metric == "W") return g.W;
  throw PreconditionError("unknown metric '" + std::string(metric) + "'");
}

Statistic summarize(std::span<const double> values) {
  Statistic s;
  s.n = values.size();
  if (values.empty()) return s;
  double sum = 0.0;
  for (const double v : values) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n >= 2) {
    double ss = 0.0;
    for (const double v : values) ss += (v - s.mean) * (v - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    const double half = 1.96 * *s.sd / std::sqrt(static_cast<double>(s.n));
    s.ci_low = s.mean - half;
    s.ci_high = s.mean + half;
  }
  return s;
}

const Statistic* ReplicationSummary::find(const std::string& group,
                                          const std::string& metric) const {
  const auto g = stats.find(group);
  if (g == stats.end()) return nullptr;
  const auto m = g->second.find(metric);
  return m == g->second.end() ? nullptr : &m->second;
}

ReplicationSummary aggregate_replications(std::span<const RunMetrics> runs,
                                          std::span<const std::string> labels) {
  ReplicationSummary out;
  out.replications = static_cast<int>(runs.size());
  out.groups.push_back(kOverallLabel);
  out.groups.insert(out.groups.end(), labels.begin(), labels.end());

  for (const auto& group : out.groups) {
    for (const char* metric : kMetricNames) {
      std::vector<double> values;
      for (const RunMetrics& r : runs) {
        const GroupMetrics* g = nullptr;
        if (group == kOverallLabel) {
          g = &r.overall;
        } else if (const auto it = r.groups.find(group); it != r.groups.end()) {
          g = &it->second;
        }
        if (!g) continue;
        if (const auto v = metric_value(*g, metric)) values.push_back(*v);
      }
      // Replications where the metric is undefined are left out; a metric
      // undefined everywhere is not reported.
      if (!values.empty()) out.stats[group][metric] = summarize(values);
    }
  }
  for (const auto& label : labels) {
    for (const char* metric : kMetricNames) {
      if (std::string_view(metric) == "arrivals") continue;
      const Statistic* pop = out.find(kOverallLabel, metric);
      const Statistic* sub = out.find(label, metric);
      if (!pop || !sub || !pop->ci_low) continue;
      out.significant[label][metric] = sub->mean < *pop->ci_low || sub->mean > *pop->ci_high;
    }
  }
  return out;
}

std::vector<std::string> ethnicity_labels(std::span<const Pair> pairs) {
  std::set<std::string> labels;
  for (const Pair& p : pairs) labels.insert(p.ethnicity);
  return {labels.begin(), labels.end()};
}

// ---------------------------------------------------------------------------

namespace {

// Stream offset for pool regeneration so it never collides with time streams.
constexpr std::uint64_t kRegenerateStream = 1ULL << 40;

}  // namespace

std::vector<Replication> run_replications(const PoolSource& source, const SimConfig& cfg,
                                          std::vector<std::string> labels) {
  cfg.validate();
  max_score(cfg.threshold.paradigm, cfg.threshold.loci);
  if (!source.regenerate && !source.graph && !source.tables) {
    throw PreconditionError("pool source needs HLA tables or a prebuilt graph");
  }
  if (source.regenerate && !source.tables) {
    throw PreconditionError("regenerating pools needs HLA tables");
  }
  if (source.regenerate && !source.resample_times) {
    throw PreconditionError("regenerated pools always get new times");
  }

  std::optional<CompatibilityGraph> own_graph;
  const CompatibilityGraph* fixed_graph = source.graph;
  if (!source.regenerate) {
    validate_pool(source.pool);
    if (!fixed_graph) {
      own_graph = build_graph(source.pool, cfg.threshold, *source.tables);
      fixed_graph = &*own_graph;
    }
    if (labels.empty()) labels = ethnicity_labels(source.pool);
  } else if (labels.empty()) {
    for (const auto& e : source.regenerate->ethnicities) labels.push_back(e.label);
    std::sort(labels.begin(), labels.end());
  }

  const auto reps = static_cast<std::size_t>(cfg.replications);
  std::vector<Replication> out(reps);
  auto one = [&](std::size_t r) {
    std::vector<Pair> pairs;
    std::optional<CompatibilityGraph> graph;
    const CompatibilityGraph* g = fixed_graph;
    if (source.regenerate) {
      PoolSpec spec = *source.regenerate;
      spec.seed = derive_seed(cfg.seed, kRegenerateStream + r);
      pairs = generate_pairs(spec, *source.tables);
      graph = build_graph(pairs, cfg.threshold, *source.tables);
      g = &*graph;
    } else {
      pairs = source.pool;
    }
    if (source.resample_times) {
      ArrivalConfig arrivals = cfg.arrivals;
      arrivals.horizon = cfg.horizon;
      arrivals.seed = derive_seed(cfg.seed, r);
      pairs = assign_arrival_departure(std::move(pairs), arrivals);
    }
    Replication& rep = out[r];
    rep.index = static_cast<int>(r);
    rep.log = run_simulation(*g, pairs, cfg);
    rep.metrics = compute_metrics(rep.log, labels, cfg);
  };

  std::size_t workers = cfg.workers > 0 ? static_cast<std::size_t>(cfg.workers)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, reps);
  if (workers <= 1) {
    for (std::size_t r = 0; r < reps; ++r) one(r);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::size_t failed_at = reps;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t r = next.fetch_add(1);
        if (r >= reps) return;
        try {
          one(r);
        } catch (...) {
          // Report the lowest failing replication so errors are deterministic.
          std::lock_guard lock(failure_mutex);
          if (r < failed_at) {
            failed_at = r;
            failure = std::current_exception();
          }
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::vector<CorrelationRow> export_paradigm_correlation(const CompatibilityGraph& graph) {
  std::vector<CorrelationRow> rows;
  rows.reserve(graph.arc_count());
  for (const Arc& a : graph.arcs()) {
    rows.push_back({graph.node_id(a.from), graph.node_id(a.to), a.scores});
  }
  return rows;
}

}  // namespace kep
