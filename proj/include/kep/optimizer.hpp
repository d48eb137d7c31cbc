// optimizer.hpp
// Time-instant KEP: cycle enumeration, cycle weights and exact maximum-weight
// packing of vertex-disjoint cycles.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "kep/compatibility.hpp"

namespace kep {

/// Node indices of a graph, in canonical rotation (smallest index first).
struct Cycle {
  std::array<std::uint32_t, 3> members{};
  std::uint8_t length = 0;
  double weight = 0.0;

  std::span<const std::uint32_t> nodes() const { return {members.data(), length}; }
  /// Rotates so the smallest member comes first.
  static Cycle canonical(std::span<const std::uint32_t> nodes, double weight = 0.0);
};

/// Lexicographic order on the member sequence; a 2-cycle that is a prefix of
/// a 3-cycle sorts first.
bool key_less(const Cycle& a, const Cycle& b);
bool same_key(const Cycle& a, const Cycle& b);

/// Objective of the time-instant problem. Each transplant into a recipient
/// of subpopulation s contributes v_s * (1 + score / (m * Z)).
struct ObjectiveConfig {
  Paradigm paradigm = Paradigm::Antigen;
  int z = 10;
  double m = 990.0;
  /// Subpopulation weights v_s. Empty means every weight is 1.
  std::map<std::string, double> equity_weights;

  static ObjectiveConfig for_threshold(const ThresholdConfig& cfg, double m);
  double weight_of(const std::string& label) const;
  void validate() const;
};

struct Solution {
  std::vector<Cycle> cycles;  // sorted by key
  double objective = 0.0;
  int run = -1;               // time-instant index, -1 when not tagged

  std::size_t transplants() const;
};

struct Instance {
  const CompatibilityGraph* graph = nullptr;
  std::vector<std::uint32_t> active;  // node indices
  ObjectiveConfig objective;
  int max_cycle_length = 3;
};

/// Every simple directed cycle of length 2..max_len inside the active set,
/// once each, in canonical rotation and sorted by key. Weights are zero.
std::vector<Cycle> enumerate_cycles(const CompatibilityGraph& graph,
                                    std::span<const std::uint32_t> active, int max_len);

/// Sum of arc scores around the cycle divided by Z.
double cycle_hla(const Cycle& cycle, const CompatibilityGraph& graph, const ObjectiveConfig& cfg);

/// Sum over the cycle's arcs u -> v of v(s(r_v)) * (1 + score(u -> v) / (m Z)).
/// With unit weights this equals |C| + HLA(C) / m.
double cycle_weight(const Cycle& cycle, const CompatibilityGraph& graph, const ObjectiveConfig& cfg);

/// Exact maximum-weight set of vertex-disjoint cycles. Among optimal packings
/// (within 1e-9 relative) the one whose sorted key list is lexicographically
/// smallest is returned. Weights must be positive.
Solution solve_packing(std::vector<Cycle> cycles);

/// Enumerates cycles over the active set, weights them and packs them.
Solution solve_instant_kep(const Instance& instance);

/// Exhaustive reference: visits every packing. Throws TooLarge beyond
/// kBruteForceMaxNodes distinct nodes.
inline constexpr std::size_t kBruteForceMaxNodes = 16;
Solution brute_force_packing(std::vector<Cycle> cycles);

/// Statistics of the last solve_packing call on this thread.
struct PackingStats {
  std::size_t components = 0;
  std::size_t nodes = 0;        // ordered search
  std::size_t value_nodes = 0;  // optimal value search
  std::size_t lp_solves = 0;
  std::size_t lp_iterations = 0;
};
const PackingStats& last_packing_stats();

}  // namespace kep
