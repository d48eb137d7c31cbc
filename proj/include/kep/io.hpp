// io.hpp
// File formats: pool JSON/CSV, population spec, graph and instance dumps,
// metric tables, event logs, search traces and run manifests.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "kep/compatibility.hpp"
#include "kep/equity.hpp"
#include "kep/optimizer.hpp"
#include "kep/pool.hpp"
#include "kep/simulation.hpp"

namespace kep::io {

using Json = nlohmann::ordered_json;

/// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

std::string read_text_file(const std::string& path);
/// Creates missing parent directories.
void write_text_file(const std::string& path, const std::string& text);
Json read_json_file(const std::string& path);
/// Two-space indentation and a trailing newline.
std::string dump(const Json& json);

// --- pool -------------------------------------------------------------------

/// {"A": ["A*01:01", "A*02:01"], ...}; loci absent from the typing are omitted.
Json typing_to_json(const HlaTyping& typing);
HlaTyping typing_from_json(const Json& json);

/// Array of pair objects. A departure of kNever is written as null.
Json pool_to_json(std::span<const Pair> pairs);
/// Throws ParseError naming the offending pair, and InvariantViolation for
/// duplicate ids or arrival >= departure.
std::vector<Pair> pool_from_json(const Json& json);
std::vector<Pair> load_pool(const std::string& path);
void save_pool(const std::string& path, std::span<const Pair> pairs);
/// HLA slots joined by '/', loci by ';', DSAs by ';'.
void write_pool_csv(std::ostream& out, std::span<const Pair> pairs);

// --- population spec and tables ----------------------------------------------

PoolSpec pool_spec_from_json(const Json& json);
Json pool_spec_to_json(const PoolSpec& spec);
HlaTables load_tables(const std::string& antigen_map_path, const std::string& eplet_registry_path);

// --- graph and instances -------------------------------------------------------

Json graph_to_json(const CompatibilityGraph& graph);

/// Active pair ids and cycles (pair ids plus weight) of one time-instant KEP.
Json instance_to_json(const CompatibilityGraph& graph, std::span<const std::uint32_t> active,
                      std::span<const Cycle> cycles);
struct InstanceDump {
  std::vector<std::uint32_t> active;  // node indices
  std::vector<Cycle> cycles;
};
InstanceDump instance_from_json(const Json& json, const CompatibilityGraph& graph);

// --- simulation outputs ----------------------------------------------------------

/// replication,group,metric,value; undefined metrics have an empty value.
void write_metrics_csv(std::ostream& out, std::span<const Replication> reps);
Json summary_to_json(const ReplicationSummary& summary);
/// One JSON object per pair and replication.
void write_event_log(std::ostream& out, std::span<const Replication> reps);
Json runs_to_json(std::span<const Replication> reps);
void write_correlation_csv(std::ostream& out, std::span<const CorrelationRow> rows);

// --- equity ----------------------------------------------------------------------

void write_trace_csv(std::ostream& out, const SearchResult& result);
Json weights_to_json(const std::map<std::string, double>& weights);
/// Accepts {"weights": {...}} or a bare object of label -> weight.
std::map<std::string, double> weights_from_json(const Json& json);

// --- manifests -------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view text);
std::string hex64(std::uint64_t value);
extern const char* const kVersion;

struct Manifest {
  std::string command;
  std::uint64_t seed = 0;
  Json config;
  std::map<std::string, std::string> inputs;   // role -> path
  std::map<std::string, std::string> outputs;  // role -> path
  Json extra = Json::object();

  /// Adds the config hash (FNV-1a of the compact config dump) and the version.
  Json to_json() const;
};

}  // namespace kep::io
