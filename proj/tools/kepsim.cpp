// kepsim: command-line front end.
//
//   kepsim <command> [--config FILE] [--seed N] [--out DIR] [--paradigm P]
//          [--loci L] [--replications N] [--workers N] ...
//
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 runtime error.
// Errors are also printed to stderr as a JSON object.
#include <CLI11.hpp>
#include <iostream>

#include "kep/error.hpp"
#include "kep/experiment.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out, paradigm, loci, pool, population, antigen_map, eplet_registry,
      weights;
  std::optional<int> replications, workers, min_score, max_iterations;
  std::optional<double> increment;

  void apply(kep::ExperimentConfig& cfg) const {
    if (seed) cfg.seed = *seed;
    if (out) cfg.paths.output = *out;
    if (paradigm) cfg.paradigm = kep::parse_paradigm(*paradigm);
    if (loci) cfg.loci = *loci;
    if (pool) cfg.paths.pool = *pool;
    if (population) cfg.paths.population = *population;
    if (antigen_map) cfg.paths.antigen_map = *antigen_map;
    if (eplet_registry) cfg.paths.eplet_registry = *eplet_registry;
    if (weights) cfg.paths.weights = *weights;
    if (replications) cfg.sim.replications = *replications;
    if (workers) cfg.sim.workers = *workers;
    if (min_score) cfg.min_score = *min_score;
    if (max_iterations) cfg.max_iterations = *max_iterations;
    if (increment) cfg.increment = *increment;
  }
};

void print_error(const std::string& kind, const std::string& cls, int code, const std::string& msg) {
  kep::io::Json j = {{"error", {{"kind", kind}, {"class", cls}, {"exit_code", code}, {"message", msg}}}};
  std::cerr << j.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kidney exchange simulation and equity weight search"};
  app.require_subcommand(1);
  // Later flags win, so a command line can override itself.
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  Overrides o;
  app.add_option("--config", o.config, "experiment configuration (JSON)");
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--paradigm", o.paradigm, "antigen | allele | eplet");
  app.add_option("--loci", o.loci, "full | bdrdq | drdq");
  app.add_option("--replications", o.replications, "number of replications");
  app.add_option("--workers", o.workers, "worker threads (0 = all cores)");
  app.add_option("--pool", o.pool, "pool JSON");
  app.add_option("--population", o.population, "population spec JSON");
  app.add_option("--antigen-map", o.antigen_map, "allele -> antigen CSV");
  app.add_option("--eplet-registry", o.eplet_registry, "eplet registry CSV");
  app.add_option("--weights", o.weights, "equity weights JSON (simulate)");
  app.add_option("--min-score", o.min_score, "minimum compatibility score");
  app.add_option("--increment", o.increment, "weight increment (equity-search)");
  app.add_option("--max-iterations", o.max_iterations, "iteration cap (equity-search)");

  using Command = void (*)(const kep::ExperimentConfig&, std::ostream&);
  const std::pair<const char*, Command> commands[] = {
      {"generate-pool", kep::cmd_generate_pool}, {"build-graph", kep::cmd_build_graph},
      {"simulate", kep::cmd_simulate},           {"equity-search", kep::cmd_equity_search},
      {"fig-data", kep::cmd_fig_data},           {"report", kep::cmd_report},
  };
  for (const auto& [name, fn] : commands) app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("UsageError", "config", 2, e.what());
    return 2;
  }

  try {
    kep::ExperimentConfig cfg;
    if (!o.config.empty()) cfg = kep::ExperimentConfig::load(o.config);
    o.apply(cfg);
    cfg.finalize();
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) fn(cfg, std::cout);
    }
  } catch (const kep::Error& e) {
    std::cerr << kep::error_json(e).dump() << '\n';
    return kep::exit_code_of(e.error_class());
  } catch (const std::exception& e) {
    print_error("InternalError", "runtime", 4, e.what());
    return 4;
  }
  return 0;
}
