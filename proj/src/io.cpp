// io.cpp
#include "kep/io.hpp"

#include <charconv>
#include <cstdio>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "kep/error.hpp"

namespace kep::io {

const char* const kVersion = "1.0.0";

std::string format_double(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return {buf, res.ptr};
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FileError("cannot write '" + path + "'");
  out << text;
  if (!out) throw FileError("write to '" + path + "' failed");
}

Json read_json_file(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

std::string dump(const Json& json) { return json.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

namespace {

const Json& member(const Json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "'");
  return *it;
}

std::string string_of(const Json& v, const char* what) {
  if (!v.is_string()) throw ParseError(std::string(what) + " must be a string");
  return v.get<std::string>();
}

double number_of(const Json& v, const char* what) {
  if (!v.is_number()) throw ParseError(std::string(what) + " must be a number");
  return v.get<double>();
}

BloodType blood_of(const Json& v) {
  const auto text = string_of(v, "blood type");
  const auto b = parse_blood_type(text);
  if (!b) throw ParseError("unknown blood type '" + text + "'");
  return *b;
}

Json time_to_json(double t) { return std::isinf(t) ? Json(nullptr) : Json(t); }

}  // namespace

Json typing_to_json(const HlaTyping& typing) {
  Json out = Json::object();
  for (const Locus l : kAllLoci) {
    if (!typing.has(l)) continue;
    const auto& slots = typing.at(l);
    out[std::string(locus_name(l))] = Json::array({slots[0].to_string(), slots[1].to_string()});
  }
  return out;
}

HlaTyping typing_from_json(const Json& json) {
  if (!json.is_object()) throw ParseError("typing must be an object of locus -> [slot, slot]");
  HlaTyping typing;
  for (const auto& [key, value] : json.items()) {
    const auto locus = parse_locus(key);
    if (!locus) throw ParseError("unknown locus '" + key + "'");
    if (!value.is_array() || value.size() != 2) {
      throw ParseError("locus " + key + " must list exactly two slots");
    }
    Allele a = Allele::parse(string_of(value[0], "HLA slot"));
    Allele b = Allele::parse(string_of(value[1], "HLA slot"));
    if (a.locus != *locus || b.locus != *locus) {
      throw ParseError("slot listed under locus " + key + " belongs to another locus");
    }
    typing.set(*locus, std::move(a), std::move(b));
  }
  return typing;
}

Json pool_to_json(std::span<const Pair> pairs) {
  Json out = Json::array();
  for (const Pair& p : pairs) {
    Json dsa = Json::array();
    for (const DsaEntry& d : p.dsa) dsa.push_back(d.allele.to_string());
    Json o;
    o["id"] = p.id;
    o["ethnicity"] = p.ethnicity;
    o["recipient"] = {{"blood", blood_type_name(p.recipient_blood)},
                      {"hla", typing_to_json(p.recipient_typing)},
                      {"dsa", dsa}};
    o["donor"] = {{"blood", blood_type_name(p.donor_blood)}, {"hla", typing_to_json(p.donor_typing)}};
    o["arrival"] = p.arrival;
    o["departure"] = time_to_json(p.departure);
    out.push_back(std::move(o));
  }
  return out;
}

std::vector<Pair> pool_from_json(const Json& json) {
  if (!json.is_array()) throw ParseError("pool must be a JSON array of pairs");
  std::vector<Pair> pairs;
  pairs.reserve(json.size());
  for (std::size_t k = 0; k < json.size(); ++k) {
    const Json& o = json[k];
    try {
      if (!o.is_object()) throw ParseError("not an object");
      Pair p;
      const Json& id = member(o, "id");
      if (!id.is_number_unsigned()) throw ParseError("id must be a non-negative integer");
      p.id = id.get<PairId>();
      p.ethnicity = string_of(member(o, "ethnicity"), "ethnicity");
      const Json& r = member(o, "recipient");
      const Json& d = member(o, "donor");
      p.recipient_blood = blood_of(member(r, "blood"));
      p.recipient_typing = typing_from_json(member(r, "hla"));
      if (const auto it = r.find("dsa"); it != r.end()) {
        if (!it->is_array()) throw ParseError("dsa must be an array");
        for (const Json& e : *it) p.dsa.push_back({Allele::parse(string_of(e, "dsa entry"))});
      }
      p.donor_blood = blood_of(member(d, "blood"));
      p.donor_typing = typing_from_json(member(d, "hla"));
      if (const auto it = o.find("arrival"); it != o.end()) p.arrival = number_of(*it, "arrival");
      if (const auto it = o.find("departure"); it != o.end() && !it->is_null()) {
        p.departure = number_of(*it, "departure");
      }
      pairs.push_back(std::move(p));
    } catch (const Error& e) {
      if (e.error_class() != ErrorClass::Data) throw;
      throw ParseError("pair #" + std::to_string(k) + ": " + e.what());
    } catch (const Json::exception& e) {
      throw ParseError("pair #" + std::to_string(k) + ": " + e.what());
    }
  }
  validate_pool(pairs);
  return pairs;
}

std::vector<Pair> load_pool(const std::string& path) { return pool_from_json(read_json_file(path)); }

void save_pool(const std::string& path, std::span<const Pair> pairs) {
  write_text_file(path, dump(pool_to_json(pairs)));
}

namespace {

std::string typing_cell(const HlaTyping& typing) {
  std::string out;
  for (const Locus l : kAllLoci) {
    if (!typing.has(l)) continue;
    if (!out.empty()) out += ';';
    out += typing.at(l)[0].to_string() + "/" + typing.at(l)[1].to_string();
  }
  return out;
}

}  // namespace

void write_pool_csv(std::ostream& out, std::span<const Pair> pairs) {
  out << "id,ethnicity,recipient_blood,donor_blood,recipient_hla,donor_hla,dsa,arrival,departure\n";
  for (const Pair& p : pairs) {
    std::string dsa;
    for (const DsaEntry& d : p.dsa) {
      if (!dsa.empty()) dsa += ';';
      dsa += d.allele.to_string();
    }
    out << p.id << ',' << p.ethnicity << ',' << blood_type_name(p.recipient_blood) << ','
        << blood_type_name(p.donor_blood) << ',' << typing_cell(p.recipient_typing) << ','
        << typing_cell(p.donor_typing) << ',' << dsa << ',' << format_double(p.arrival) << ','
        << (std::isinf(p.departure) ? std::string() : format_double(p.departure)) << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

BloodDistribution blood_distribution_of(const Json& j) {
  if (!j.is_object()) throw ConfigError("blood_types must be an object");
  BloodDistribution out{};
  for (const auto& [key, value] : j.items()) {
    const auto b = parse_blood_type(key);
    if (!b) throw ConfigError("unknown blood type '" + key + "'");
    if (!value.is_number()) throw ConfigError("blood type probability must be a number");
    out[static_cast<std::size_t>(*b)] = value.get<double>();
  }
  return out;
}

Json blood_distribution_to_json(const BloodDistribution& d) {
  Json out;
  for (const BloodType b : {BloodType::O, BloodType::A, BloodType::B, BloodType::AB}) {
    out[std::string(blood_type_name(b))] = d[static_cast<std::size_t>(b)];
  }
  return out;
}

template <typename T>
void read_field(const Json& j, const char* key, T& target) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    target = it->get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

PoolSpec pool_spec_from_json(const Json& json) {
  if (!json.is_object()) throw ConfigError("population spec must be a JSON object");
  static const std::set<std::string> known{
      "target_pair_count", "recipient_count", "donor_count", "seed", "dsa_rate", "dsa_candidates",
      "dsa_antigen_level_fraction", "loci", "blood_types", "ethnicities"};
  for (const auto& [key, value] : json.items()) {
    if (!known.contains(key)) throw ConfigError("unknown population spec key '" + key + "'");
  }
  PoolSpec spec;
  read_field(json, "target_pair_count", spec.target_pair_count);
  read_field(json, "recipient_count", spec.recipient_count);
  read_field(json, "donor_count", spec.donor_count);
  read_field(json, "seed", spec.seed);
  read_field(json, "dsa_rate", spec.dsa_rate);
  read_field(json, "dsa_candidates", spec.dsa_candidates);
  read_field(json, "dsa_antigen_level_fraction", spec.dsa_antigen_level_fraction);
  if (const auto it = json.find("loci"); it != json.end()) {
    if (!it->is_string()) throw ConfigError("loci must be a string");
    spec.loci = LociSet::parse(it->get<std::string>());
  }
  if (const auto it = json.find("blood_types"); it != json.end()) {
    spec.blood_types = blood_distribution_of(*it);
  }
  const auto eth = json.find("ethnicities");
  if (eth == json.end() || !eth->is_array()) throw ConfigError("ethnicities must be an array");
  for (const Json& e : *eth) {
    EthnicityProfile prof;
    if (!e.is_object()) throw ConfigError("ethnicity entries must be objects");
    for (const auto& [key, value] : e.items()) {
      if (key != "label" && key != "probability" && key != "blood_types" && key != "alleles") {
        throw ConfigError("unknown ethnicity key '" + key + "'");
      }
    }
    read_field(e, "label", prof.label);
    read_field(e, "probability", prof.probability);
    if (const auto it = e.find("blood_types"); it != e.end()) {
      prof.blood_types = blood_distribution_of(*it);
    }
    const auto alleles = e.find("alleles");
    if (alleles == e.end() || !alleles->is_object()) {
      throw ConfigError("ethnicity '" + prof.label + "' needs an alleles object");
    }
    for (const auto& [key, table] : alleles->items()) {
      const auto locus = parse_locus(key);
      if (!locus) throw ConfigError("unknown locus '" + key + "'");
      if (!table.is_object()) throw ConfigError("allele table at " + key + " must be an object");
      for (const auto& [name, p] : table.items()) {
        if (!p.is_number()) throw ConfigError("frequency of " + name + " must be a number");
        prof.alleles[locus_index(*locus)].emplace_back(Allele::parse(name), p.get<double>());
      }
    }
    spec.ethnicities.push_back(std::move(prof));
  }
  spec.validate();
  return spec;
}

Json pool_spec_to_json(const PoolSpec& spec) {
  Json out;
  out["target_pair_count"] = spec.target_pair_count;
  out["recipient_count"] = spec.recipient_count;
  out["donor_count"] = spec.donor_count;
  out["loci"] = spec.loci.name();
  out["seed"] = spec.seed;
  out["dsa_rate"] = spec.dsa_rate;
  out["dsa_candidates"] = spec.dsa_candidates;
  out["dsa_antigen_level_fraction"] = spec.dsa_antigen_level_fraction;
  out["blood_types"] = blood_distribution_to_json(spec.blood_types);
  Json eth = Json::array();
  for (const auto& e : spec.ethnicities) {
    Json o;
    o["label"] = e.label;
    o["probability"] = e.probability;
    if (e.blood_types) o["blood_types"] = blood_distribution_to_json(*e.blood_types);
    Json alleles = Json::object();
    for (const Locus l : kAllLoci) {
      const auto& table = e.alleles[locus_index(l)];
      if (table.empty()) continue;
      Json t = Json::object();
      for (const auto& [a, p] : table) t[a.to_string()] = p;
      alleles[std::string(locus_name(l))] = std::move(t);
    }
    o["alleles"] = std::move(alleles);
    eth.push_back(std::move(o));
  }
  out["ethnicities"] = std::move(eth);
  return out;
}

HlaTables load_tables(const std::string& antigen_map_path, const std::string& eplet_registry_path) {
  HlaTables t;
  t.antigen_map = AlleleToAntigenMap::load(antigen_map_path);
  t.eplets = EpletRegistry::load(eplet_registry_path);
  return t;
}

// ---------------------------------------------------------------------------

namespace {

Json scores_to_json(const ArcScores& s) {
  Json out;
  for (const Paradigm p : kAllParadigms) {
    const auto v = s.get(p);
    out[std::string(paradigm_name(p))] = v ? Json(*v) : Json(nullptr);
  }
  return out;
}

}  // namespace

Json graph_to_json(const CompatibilityGraph& graph) {
  const auto& cfg = graph.config();
  Json out;
  out["config"] = {{"paradigm", paradigm_name(cfg.paradigm)},
                   {"loci", cfg.loci.name()},
                   {"min_score", cfg.min_score}};
  Json nodes = Json::array();
  for (std::uint32_t v = 0; v < graph.node_count(); ++v) {
    nodes.push_back({{"id", graph.node_id(v)}, {"ethnicity", graph.node_label(v)}});
  }
  Json arcs = Json::array();
  for (const Arc& a : graph.arcs()) {
    Json o;
    o["from"] = graph.node_id(a.from);
    o["to"] = graph.node_id(a.to);
    o["scores"] = scores_to_json(a.scores);
    arcs.push_back(std::move(o));
  }
  out["node_count"] = graph.node_count();
  out["arc_count"] = graph.arc_count();
  out["nodes"] = std::move(nodes);
  out["arcs"] = std::move(arcs);
  return out;
}

Json instance_to_json(const CompatibilityGraph& graph, std::span<const std::uint32_t> active,
                      std::span<const Cycle> cycles) {
  Json ids = Json::array();
  for (const auto v : active) ids.push_back(graph.node_id(v));
  Json cs = Json::array();
  for (const Cycle& c : cycles) {
    Json members = Json::array();
    for (const auto v : c.nodes()) members.push_back(graph.node_id(v));
    cs.push_back({{"pairs", members}, {"weight", c.weight}});
  }
  return {{"active", ids}, {"cycles", cs}};
}

InstanceDump instance_from_json(const Json& json, const CompatibilityGraph& graph) {
  auto node_of = [&](const Json& id) {
    if (!id.is_number_unsigned()) throw ParseError("pair ids must be non-negative integers");
    const auto v = graph.index_of(id.get<PairId>());
    if (!v) throw ParseError("pair " + std::to_string(id.get<PairId>()) + " is not in the graph");
    return *v;
  };
  InstanceDump out;
  try {
    for (const Json& id : member(json, "active")) out.active.push_back(node_of(id));
    for (const Json& c : member(json, "cycles")) {
      std::vector<std::uint32_t> nodes;
      for (const Json& id : member(c, "pairs")) nodes.push_back(node_of(id));
      out.cycles.push_back(Cycle::canonical(nodes, number_of(member(c, "weight"), "weight")));
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("instance: ") + e.what());
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

void metric_rows(std::ostream& out, int rep, const std::string& group, const GroupMetrics& g) {
  for (const char* metric : kMetricNames) {
    out << rep << ',' << group << ',' << metric << ',' << cell(metric_value(g, metric)) << '\n';
  }
}

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

void write_metrics_csv(std::ostream& out, std::span<const Replication> reps) {
  out << "replication,group,metric,value\n";
  for (const Replication& r : reps) {
    metric_rows(out, r.index, kOverallLabel, r.metrics.overall);
    for (const auto& [label, g] : r.metrics.groups) metric_rows(out, r.index, label, g);
  }
}

Json summary_to_json(const ReplicationSummary& summary) {
  Json groups = Json::object();
  for (const auto& group : summary.groups) {
    Json metrics = Json::object();
    for (const char* metric : kMetricNames) {
      const Statistic* s = summary.find(group, metric);
      if (!s) {
        metrics[metric] = nullptr;
        continue;
      }
      Json o;
      o["mean"] = s->mean;
      o["sd"] = optional_json(s->sd);
      o["ci_low"] = optional_json(s->ci_low);
      o["ci_high"] = optional_json(s->ci_high);
      o["n"] = s->n;
      if (group != kOverallLabel) {
        const auto g = summary.significant.find(group);
        if (g != summary.significant.end() && g->second.count(metric)) {
          o["significant"] = g->second.at(metric);
        } else {
          o["significant"] = nullptr;
        }
      }
      metrics[metric] = std::move(o);
    }
    groups[group] = std::move(metrics);
  }
  Json out;
  out["replications"] = summary.replications;
  out["confidence_intervals"] = summary.replications >= 2;
  out["groups"] = std::move(groups);
  return out;
}

void write_event_log(std::ostream& out, std::span<const Replication> reps) {
  for (const Replication& r : reps) {
    for (const PairRecord& p : r.log.pairs) {
      Json o;
      o["replication"] = r.index;
      o["id"] = p.id;
      o["ethnicity"] = p.ethnicity;
      o["arrival"] = p.arrival;
      o["departure"] = time_to_json(p.departure);
      o["runs_present"] = p.runs_present;
      o["matched_run"] = p.matched_run ? Json(*p.matched_run) : Json(nullptr);
      o["matched_with"] = p.donor_pair ? Json(*p.donor_pair) : Json(nullptr);
      o["scores"] = p.matched_run ? scores_to_json(p.scores) : Json(nullptr);
      out << o.dump() << '\n';
    }
  }
}

Json runs_to_json(std::span<const Replication> reps) {
  Json out = Json::array();
  for (const Replication& r : reps) {
    Json runs = Json::array();
    for (const RunRecord& run : r.log.runs) {
      runs.push_back({{"run", run.index},
                      {"time", run.time},
                      {"active", run.active},
                      {"cycles", run.cycles},
                      {"transplants", run.transplants},
                      {"objective", run.objective}});
    }
    out.push_back({{"replication", r.index}, {"runs", runs}});
  }
  return out;
}

void write_correlation_csv(std::ostream& out, std::span<const CorrelationRow> rows) {
  out << "from,to,antigen,allele,eplet\n";
  auto score = [](const std::optional<int>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& r : rows) {
    out << r.from << ',' << r.to << ',' << score(r.scores.antigen) << ','
        << score(r.scores.allele) << ',' << score(r.scores.eplet) << '\n';
  }
}

// ---------------------------------------------------------------------------

void write_trace_csv(std::ostream& out, const SearchResult& result) {
  std::vector<std::string> weight_cols, score_cols, gap_cols;
  if (!result.trace.empty()) {
    for (const auto& [k, v] : result.trace.front().weights) weight_cols.push_back(k);
    for (const auto& [k, v] : result.trace.front().scores) score_cols.push_back(k);
    for (const auto& [k, v] : result.trace.front().gaps) gap_cols.push_back(k);
  }
  out << "iteration";
  for (const auto& c : weight_cols) out << ",weight_" << c;
  for (const auto& c : score_cols) out << ",score_" << c;
  for (const auto& c : gap_cols) out << ",gap_" << c;
  out << ",total_inequity,F_population,stop_rule\n";
  for (const SearchRow& row : result.trace) {
    out << row.iteration;
    for (const auto& c : weight_cols) out << ',' << format_double(row.weights.at(c));
    for (const auto& c : score_cols) out << ',' << cell(row.scores.at(c));
    for (const auto& c : gap_cols) out << ',' << cell(row.gaps.at(c));
    out << ',' << format_double(row.total) << ',' << format_double(row.f_population)
        << ",raw_score\n";
  }
}

Json weights_to_json(const std::map<std::string, double>& weights) {
  Json w = Json::object();
  for (const auto& [k, v] : weights) w[k] = v;
  return {{"weights", w}};
}

std::map<std::string, double> weights_from_json(const Json& json) {
  const Json* obj = &json;
  if (const auto it = json.find("weights"); json.is_object() && it != json.end()) obj = &*it;
  if (!obj->is_object()) throw ConfigError("weights must be an object of label -> weight");
  std::map<std::string, double> out;
  for (const auto& [k, v] : obj->items()) {
    if (!v.is_number()) throw ConfigError("weight of '" + k + "' must be a number");
    out[k] = v.get<double>();
  }
  return out;
}

// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

Json Manifest::to_json() const {
  Json out;
  out["command"] = command;
  out["version"] = kVersion;
  out["seed"] = seed;
  out["config_hash"] = "fnv1a64:" + hex64(fnv1a64(config.dump()));
  out["config"] = config;
  out["inputs"] = inputs;
  out["outputs"] = outputs;
  out["extra"] = extra;
  return out;
}

}  // namespace kep::io
