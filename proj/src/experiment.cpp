// experiment.cpp
#include "kep/experiment.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <set>
#include <sstream>

#include "kep/error.hpp"

namespace kep {

namespace fs = std::filesystem;
using io::Json;

namespace {

void check_keys(const Json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void get(const Json& obj, const char* key, T& target) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return;
  try {
    target = it->get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("key '") + key + "' has the wrong type");
  }
}

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty() || base.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

std::string out_path(const ExperimentConfig& cfg, const std::string& name) {
  return (fs::path(cfg.paths.output) / name).string();
}

void require(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " path configured");
}

HlaTables tables_of(const ExperimentConfig& cfg) {
  require(cfg.paths.antigen_map, "antigen_map");
  require(cfg.paths.eplet_registry, "eplet_registry");
  return io::load_tables(cfg.paths.antigen_map, cfg.paths.eplet_registry);
}

PoolSpec spec_of(const ExperimentConfig& cfg) {
  require(cfg.paths.population, "population");
  PoolSpec spec = io::pool_spec_from_json(io::read_json_file(cfg.paths.population));
  spec.seed = cfg.seed;
  return spec;
}

/// The pool file when configured, otherwise a pool generated from the spec.
std::vector<Pair> pool_of(const ExperimentConfig& cfg, const HlaTables& tables) {
  if (!cfg.paths.pool.empty()) return io::load_pool(cfg.paths.pool);
  return generate_pairs(spec_of(cfg), tables);
}

std::map<std::string, std::string> input_paths(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> in;
  if (!cfg.paths.pool.empty()) in["pool"] = cfg.paths.pool;
  if (!cfg.paths.population.empty()) in["population"] = cfg.paths.population;
  if (!cfg.paths.antigen_map.empty()) in["antigen_map"] = cfg.paths.antigen_map;
  if (!cfg.paths.eplet_registry.empty()) in["eplet_registry"] = cfg.paths.eplet_registry;
  if (!cfg.paths.weights.empty()) in["weights"] = cfg.paths.weights;
  return in;
}

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    std::map<std::string, std::string> outputs, Json extra = Json::object()) {
  io::Manifest m;
  m.command = command;
  m.seed = cfg.seed;
  m.config = cfg.to_json();
  m.inputs = input_paths(cfg);
  m.outputs = std::move(outputs);
  m.extra = std::move(extra);
  io::write_text_file(out_path(cfg, "manifest_" + command + ".json"), io::dump(m.to_json()));
}

std::string to_file(const std::function<void(std::ostream&)>& fn) {
  std::ostringstream ss;
  fn(ss);
  return ss.str();
}

/// Labels for metrics: every ethnicity of the spec when one is used, else the pool's.
std::vector<std::string> labels_of(const ExperimentConfig& cfg, const std::vector<Pair>& pool) {
  std::set<std::string> labels;
  for (const Pair& p : pool) labels.insert(p.ethnicity);
  if (cfg.paths.pool.empty() && !cfg.paths.population.empty()) {
    for (const auto& e : spec_of(cfg).ethnicities) labels.insert(e.label);
  }
  return {labels.begin(), labels.end()};
}

struct Prepared {
  HlaTables tables;
  PoolSource source;
  CompatibilityGraph graph;
  std::vector<std::string> labels;
  std::size_t pool_size = 0;
};

std::unique_ptr<Prepared> prepare(const ExperimentConfig& cfg) {
  auto p = std::make_unique<Prepared>();
  p->tables = tables_of(cfg);
  p->source.tables = &p->tables;
  p->source.resample_times = cfg.resample_times;
  if (cfg.regenerate_population) {
    const PoolSpec spec = spec_of(cfg);
    p->source.regenerate = spec;
    for (const auto& e : spec.ethnicities) p->labels.push_back(e.label);
    std::sort(p->labels.begin(), p->labels.end());
    p->pool_size = static_cast<std::size_t>(spec.target_pair_count);
  } else {
    p->source.pool = pool_of(cfg, p->tables);
    p->graph = build_graph(p->source.pool, cfg.sim.threshold, p->tables);
    p->source.graph = &p->graph;
    p->labels = labels_of(cfg, p->source.pool);
    p->pool_size = p->source.pool.size();
  }
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------

void ExperimentConfig::finalize() {
  const LociSet set = LociSet::parse(loci);
  sim.threshold = ThresholdConfig::defaults(paradigm, set);
  if (min_score) sim.threshold.min_score = *min_score;
  sim.seed = seed;
  sim.validate();
}

ExperimentConfig ExperimentConfig::from_json(const Json& json, const std::string& base_dir) {
  check_keys(json, "config", {"seed", "paths", "threshold", "simulation", "arrivals", "objective",
                              "equity"});
  ExperimentConfig cfg;
  get(json, "seed", cfg.seed);
  if (const auto it = json.find("paths"); it != json.end()) {
    check_keys(*it, "paths",
               {"pool", "population", "antigen_map", "eplet_registry", "output", "weights"});
    get(*it, "pool", cfg.paths.pool);
    get(*it, "population", cfg.paths.population);
    get(*it, "antigen_map", cfg.paths.antigen_map);
    get(*it, "eplet_registry", cfg.paths.eplet_registry);
    get(*it, "output", cfg.paths.output);
    get(*it, "weights", cfg.paths.weights);
  }
  for (std::string* p : {&cfg.paths.pool, &cfg.paths.population, &cfg.paths.antigen_map,
                         &cfg.paths.eplet_registry, &cfg.paths.output, &cfg.paths.weights}) {
    *p = resolve(base_dir, *p);
  }
  if (const auto it = json.find("threshold"); it != json.end()) {
    check_keys(*it, "threshold", {"paradigm", "loci", "min_score"});
    std::string paradigm = std::string(paradigm_name(cfg.paradigm));
    get(*it, "paradigm", paradigm);
    cfg.paradigm = parse_paradigm(paradigm);
    get(*it, "loci", cfg.loci);
    if (const auto ms = it->find("min_score"); ms != it->end() && !ms->is_null()) {
      int v = 0;
      get(*it, "min_score", v);
      cfg.min_score = v;
    }
  }
  SimConfig& sim = cfg.sim;
  if (const auto it = json.find("simulation"); it != json.end()) {
    check_keys(*it, "simulation",
               {"start", "horizon", "match_interval", "replications", "workers", "m",
                "wait_counts_matching_run", "regenerate_population", "resample_times",
                "max_cycle_length"});
    get(*it, "start", sim.start);
    get(*it, "horizon", sim.horizon);
    get(*it, "match_interval", sim.match_interval);
    get(*it, "replications", sim.replications);
    get(*it, "workers", sim.workers);
    get(*it, "m", sim.m);
    get(*it, "wait_counts_matching_run", sim.wait_counts_matching_run);
    get(*it, "regenerate_population", cfg.regenerate_population);
    get(*it, "resample_times", cfg.resample_times);
    get(*it, "max_cycle_length", sim.max_cycle_length);
  }
  if (const auto it = json.find("arrivals"); it != json.end()) {
    check_keys(*it, "arrivals", {"expected_arrivals", "departure_hazard_per_year"});
    get(*it, "expected_arrivals", sim.arrivals.expected_arrivals);
    double per_year = sim.arrivals.departure_hazard * 365.0;
    get(*it, "departure_hazard_per_year", per_year);
    sim.arrivals.departure_hazard = per_year / 365.0;
  }
  if (const auto it = json.find("objective"); it != json.end()) {
    check_keys(*it, "objective", {"equity_weights"});
    if (const auto w = it->find("equity_weights"); w != it->end() && !w->is_null()) {
      sim.equity_weights = io::weights_from_json(*w);
    }
  }
  if (const auto it = json.find("equity"); it != json.end()) {
    check_keys(*it, "equity", {"increment", "max_iterations", "targets", "min_share"});
    get(*it, "increment", cfg.increment);
    get(*it, "max_iterations", cfg.max_iterations);
    get(*it, "targets", cfg.targets);
    get(*it, "min_share", cfg.min_share);
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  Json json;
  try {
    json = Json::parse(io::read_text_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
  return from_json(json, fs::path(path).parent_path().string());
}

Json ExperimentConfig::to_json() const {
  auto opt = [](const std::string& s) { return s.empty() ? Json(nullptr) : Json(s); };
  Json j;
  j["seed"] = seed;
  j["paths"] = {{"pool", opt(paths.pool)},
                {"population", opt(paths.population)},
                {"antigen_map", opt(paths.antigen_map)},
                {"eplet_registry", opt(paths.eplet_registry)},
                {"output", paths.output},
                {"weights", opt(paths.weights)}};
  j["threshold"] = {{"paradigm", paradigm_name(paradigm)},
                    {"loci", loci},
                    {"min_score", sim.threshold.min_score}};
  j["simulation"] = {{"start", sim.start},
                     {"horizon", sim.horizon},
                     {"match_interval", sim.match_interval},
                     {"replications", sim.replications},
                     {"m", sim.m > 0 ? Json(sim.m) : Json(nullptr)},
                     {"wait_counts_matching_run", sim.wait_counts_matching_run},
                     {"regenerate_population", regenerate_population},
                     {"resample_times", resample_times},
                     {"max_cycle_length", sim.max_cycle_length}};
  j["arrivals"] = {{"expected_arrivals", sim.arrivals.expected_arrivals},
                   {"departure_hazard_per_year", sim.arrivals.departure_hazard * 365.0}};
  j["objective"] = {{"equity_weights", io::weights_to_json(sim.equity_weights)["weights"]}};
  j["equity"] = {{"increment", increment},
                 {"max_iterations", max_iterations},
                 {"targets", targets},
                 {"min_share", min_share}};
  return j;
}

// ---------------------------------------------------------------------------

void cmd_generate_pool(const ExperimentConfig& cfg, std::ostream& log) {
  const HlaTables tables = tables_of(cfg);
  const PoolSpec spec = spec_of(cfg);
  std::vector<Pair> pairs = generate_pairs(spec, tables);
  const auto json_path = out_path(cfg, "pool.json");
  const auto csv_path = out_path(cfg, "pool.csv");
  io::save_pool(json_path, pairs);
  io::write_text_file(csv_path, to_file([&](std::ostream& o) { io::write_pool_csv(o, pairs); }));
  Json extra;
  extra["pairs"] = pairs.size();
  extra["population_hash"] = "fnv1a64:" + io::hex64(io::fnv1a64(io::pool_spec_to_json(spec).dump()));
  write_manifest(cfg, "generate-pool", {{"pool", json_path}, {"pool_csv", csv_path}}, extra);
  log << "generated " << pairs.size() << " pairs -> " << json_path << '\n';
}

void cmd_build_graph(const ExperimentConfig& cfg, std::ostream& log) {
  const HlaTables tables = tables_of(cfg);
  const auto pool = pool_of(cfg, tables);
  const auto graph = build_graph(pool, cfg.sim.threshold, tables);
  const auto path = out_path(cfg, "graph.json");
  io::write_text_file(path, io::dump(io::graph_to_json(graph)));
  write_manifest(cfg, "build-graph", {{"graph", path}},
                 {{"nodes", graph.node_count()}, {"arcs", graph.arc_count()}});
  log << "graph with " << graph.node_count() << " nodes and " << graph.arc_count() << " arcs -> "
      << path << '\n';
}

void cmd_simulate(const ExperimentConfig& cfg, std::ostream& log) {
  SimConfig sim = cfg.sim;
  if (!cfg.paths.weights.empty()) {
    sim.equity_weights = io::weights_from_json(io::read_json_file(cfg.paths.weights));
    sim.validate();
  }
  const auto prep = prepare(cfg);
  const auto reps = run_replications(prep->source, sim, prep->labels);
  std::vector<RunMetrics> metrics;
  for (const auto& r : reps) metrics.push_back(r.metrics);
  const auto summary = aggregate_replications(metrics, prep->labels);

  const auto metrics_path = out_path(cfg, "metrics.csv");
  const auto summary_path = out_path(cfg, "summary.json");
  const auto events_path = out_path(cfg, "events.jsonl");
  const auto runs_path = out_path(cfg, "runs.json");
  io::write_text_file(metrics_path, to_file([&](std::ostream& o) { io::write_metrics_csv(o, reps); }));
  Json summary_json = io::summary_to_json(summary);
  summary_json["paradigm"] = paradigm_name(cfg.paradigm);
  summary_json["loci"] = cfg.loci;
  summary_json["m"] = sim.objective(prep->pool_size).m;
  summary_json["equity_weights"] = io::weights_to_json(sim.equity_weights)["weights"];
  io::write_text_file(summary_path, io::dump(summary_json));
  io::write_text_file(events_path, to_file([&](std::ostream& o) { io::write_event_log(o, reps); }));
  io::write_text_file(runs_path, io::dump(io::runs_to_json(reps)));
  write_manifest(cfg, "simulate",
                 {{"metrics", metrics_path},
                  {"summary", summary_path},
                  {"events", events_path},
                  {"runs", runs_path}},
                 {{"pool_size", prep->pool_size}, {"confidence_intervals", sim.replications >= 2}});
  const Statistic* f = summary.find(kOverallLabel, "F");
  log << sim.replications << " replications, F(P) = " << (f ? io::format_double(f->mean) : "n/a");
  if (sim.replications < 2) log << " (single replication: no confidence intervals)";
  log << '\n';
}

void cmd_equity_search(const ExperimentConfig& cfg, std::ostream& log) {
  const auto prep = prepare(cfg);
  SimConfig sim = cfg.sim;
  SearchConfig search;
  search.targets = cfg.targets;
  search.labels = prep->labels;
  search.increment = cfg.increment;
  search.max_iterations = cfg.max_iterations;
  search.min_share = cfg.min_share;
  search.paradigm = cfg.paradigm;
  search.m = sim.objective(prep->pool_size).m;

  std::map<std::string, ReplicationSummary> seen;
  const WeightEvaluator evaluate = [&](const std::map<std::string, double>& weights) {
    sim.equity_weights = weights;
    const auto reps = run_replications(prep->source, sim, prep->labels);
    std::vector<RunMetrics> metrics;
    for (const auto& r : reps) metrics.push_back(r.metrics);
    auto summary = aggregate_replications(metrics, prep->labels);
    seen[io::weights_to_json(weights).dump()] = summary;
    log << "  evaluated weights " << io::weights_to_json(weights)["weights"].dump() << '\n';
    return summary;
  };
  const SearchResult result = rawlsian_weight_search(evaluate, search);

  const auto trace_path = out_path(cfg, "trace.csv");
  const auto weights_path = out_path(cfg, "weights.json");
  const auto summary_path = out_path(cfg, "equity_summary.json");
  io::write_text_file(trace_path, to_file([&](std::ostream& o) { io::write_trace_csv(o, result); }));
  Json weights = io::weights_to_json(result.best_weights);
  io::write_text_file(weights_path, io::dump(weights));
  Json summary;
  summary["status"] = search_status_name(result.status);
  summary["stop_rule"] = "raw_score";
  summary["iterations"] = result.iterations;
  summary["best_iteration"] = result.best_iteration;
  summary["baseline_total_inequity"] = result.trace.front().total;
  summary["best_total_inequity"] = result.best_total;
  summary["baseline_F"] = result.trace.front().f_population;
  summary["best_F"] = result.trace[static_cast<std::size_t>(result.best_iteration)].f_population;
  summary["targets"] = [&] {
    Json t = Json::array();
    for (const auto& [k, v] : result.trace.front().gaps) t.push_back(k);
    return t;
  }();
  summary["m"] = search.m;
  summary["weights"] = weights["weights"];
  summary["best_summary"] = io::summary_to_json(seen.at(weights.dump()));
  io::write_text_file(summary_path, io::dump(summary));
  write_manifest(cfg, "equity-search",
                 {{"trace", trace_path}, {"weights", weights_path}, {"summary", summary_path}},
                 {{"trace_rows", result.trace.size()}});
  log << "search " << search_status_name(result.status) << " after " << result.iterations
      << " iterations; total inequity " << io::format_double(result.trace.front().total) << " -> "
      << io::format_double(result.best_total) << '\n';
}

void cmd_fig_data(const ExperimentConfig& cfg, std::ostream& log) {
  const HlaTables tables = tables_of(cfg);
  const auto pool = pool_of(cfg, tables);
  const auto graph = build_graph(pool, cfg.sim.threshold, tables);
  const auto rows = export_paradigm_correlation(graph);
  const auto path = out_path(cfg, "correlation.csv");
  io::write_text_file(path, to_file([&](std::ostream& o) { io::write_correlation_csv(o, rows); }));
  write_manifest(cfg, "fig-data", {{"correlation", path}},
                 {{"nodes", graph.node_count()}, {"arcs", graph.arc_count()}, {"rows", rows.size()}});
  log << rows.size() << " arcs -> " << path << '\n';
}

void cmd_report(const ExperimentConfig& cfg, std::ostream& log) {
  const auto summary_path = out_path(cfg, "summary.json");
  const Json summary = io::read_json_file(summary_path);
  static constexpr const char* kColumns[] = {"F", "HLA_antigen", "HLA_allele", "HLA_eplet",
                                             "W", "L", "remaining", "arrivals"};
  std::ostringstream out;
  out << "paradigm: " << summary.value("paradigm", std::string("?"))
      << ", replications: " << summary.value("replications", 0) << '\n';
  out << "values are means; [low, high] is the 95% interval; * marks a group mean outside "
         "the population interval\n\n";
  out << std::left << std::setw(18) << "group";
  for (const char* c : kColumns) out << std::setw(26) << c;
  out << '\n';
  const auto groups = summary.find("groups");
  if (groups == summary.end() || !groups->is_object()) {
    throw ParseError("'" + summary_path + "' has no groups");
  }
  for (const auto& [group, metrics] : groups->items()) {
    out << std::setw(18) << group;
    for (const char* c : kColumns) {
      std::ostringstream cellss;
      const auto it = metrics.find(c);
      if (it == metrics.end() || it->is_null()) {
        cellss << "-";
      } else {
        cellss << std::fixed << std::setprecision(3) << (*it)["mean"].get<double>();
        if (!(*it)["ci_low"].is_null()) {
          cellss << " [" << (*it)["ci_low"].get<double>() << ", " << (*it)["ci_high"].get<double>()
                 << "]";
        }
        if (it->contains("significant") && (*it)["significant"].is_boolean() &&
            (*it)["significant"].get<bool>()) {
          cellss << '*';
        }
      }
      out << std::setw(26) << cellss.str();
    }
    out << '\n';
  }
  const auto path = out_path(cfg, "report.txt");
  io::write_text_file(path, out.str());
  write_manifest(cfg, "report", {{"report", path}});
  log << out.str();
}

int exit_code_of(ErrorClass cls) {
  switch (cls) {
    case ErrorClass::Config: return 2;
    case ErrorClass::Data: return 3;
    case ErrorClass::Runtime: return 4;
  }
  return 4;
}

Json error_json(const Error& err) {
  static constexpr const char* kClass[] = {"config", "data", "runtime"};
  return {{"error",
           {{"kind", err.kind()},
            {"class", kClass[static_cast<int>(err.error_class())]},
            {"exit_code", exit_code_of(err.error_class())},
            {"message", err.what()}}}};
}

}  // namespace kep
