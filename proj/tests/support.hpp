// Shared helpers for the test binaries.
#pragma once

#include <algorithm>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "kep/compatibility.hpp"
#include "kep/io.hpp"
#include "kep/optimizer.hpp"
#include "kep/random.hpp"

namespace kep::testing {

/// Slots listed two per locus, e.g. {"A*01:01", "A*02:01", "B07", "B08"}.
inline HlaTyping typing(std::initializer_list<const char*> slots) {
  HlaTyping t;
  std::vector<Allele> parsed;
  for (const char* s : slots) parsed.push_back(Allele::parse(s));
  for (std::size_t k = 0; k + 1 < parsed.size(); k += 2) {
    t.set(parsed[k].locus, parsed[k], parsed[k + 1]);
  }
  return t;
}

/// Random digraph with arc probability `density` and antigen scores in [0, 10].
inline CompatibilityGraph random_graph(Rng& rng, std::size_t n, double density,
                                       std::vector<std::string> labels = {}) {
  std::vector<PairId> ids(n);
  for (std::size_t k = 0; k < n; ++k) ids[k] = static_cast<PairId>(k);
  if (labels.empty()) labels.assign(n, "S");
  std::vector<Arc> arcs;
  for (std::uint32_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < n; ++j) {
      if (i == j || !rng.bernoulli(density)) continue;
      Arc a{i, j, {}};
      a.scores.antigen = static_cast<int>(rng.index(11));
      a.scores.allele = static_cast<int>(rng.index(11));
      a.scores.eplet = static_cast<int>(rng.index(139));
      arcs.push_back(a);
    }
  }
  ThresholdConfig cfg;
  cfg.min_score = 0;
  return CompatibilityGraph(cfg, std::move(ids), std::move(labels), std::move(arcs));
}

inline std::vector<std::uint32_t> all_nodes(const CompatibilityGraph& g) {
  std::vector<std::uint32_t> v(g.node_count());
  for (std::uint32_t k = 0; k < v.size(); ++k) v[k] = k;
  return v;
}

/// Every simple cycle of length 2..max_len, found by extending paths from
/// each start vertex and keeping those whose start is the minimum.
inline std::set<std::vector<std::uint32_t>> naive_cycles(const CompatibilityGraph& g, int max_len) {
  std::set<std::vector<std::uint32_t>> out;
  const auto n = static_cast<std::uint32_t>(g.node_count());
  std::vector<std::uint32_t> path;
  auto extend = [&](auto&& self) -> void {
    if (path.size() >= 2 && g.has_arc(path.back(), path.front())) {
      if (*std::min_element(path.begin(), path.end()) == path.front()) out.insert(path);
    }
    if (static_cast<int>(path.size()) == max_len) return;
    for (std::uint32_t w = 0; w < n; ++w) {
      if (std::find(path.begin(), path.end(), w) != path.end()) continue;
      if (!g.has_arc(path.back(), w)) continue;
      path.push_back(w);
      self(self);
      path.pop_back();
    }
  };
  for (std::uint32_t s = 0; s < n; ++s) {
    path = {s};
    extend(extend);
  }
  return out;
}

#ifdef KEP_DATA_DIR
inline const HlaTables& shipped_tables() {
  static const HlaTables tables =
      io::load_tables(KEP_DATA_DIR "/antigen_map.csv", KEP_DATA_DIR "/eplet_registry.csv");
  return tables;
}

/// The shipped population spec scaled to `pairs` pairs.
inline PoolSpec shipped_spec(int pairs, std::uint64_t seed) {
  PoolSpec spec = io::pool_spec_from_json(io::read_json_file(KEP_DATA_DIR "/population.json"));
  spec.target_pair_count = pairs;
  spec.recipient_count = pairs * 1332 / 990 + 2;
  spec.donor_count = pairs * 1401 / 990 + 2;
  spec.seed = seed;
  return spec;
}

inline std::vector<Pair> shipped_pool(int pairs, std::uint64_t seed) {
  return generate_pairs(shipped_spec(pairs, seed), shipped_tables());
}
#endif

}  // namespace kep::testing
