// pool.hpp
// Building the pair population: synthetic persons, mutually incompatible
// recipient-donor pairing by maximum-cardinality bipartite matching, and
// arrival/departure sampling.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kep/compatibility.hpp"

namespace kep {

enum class Role : std::uint8_t { Recipient, Donor };

struct PersonRecord {
  std::uint32_t id = 0;
  Role role = Role::Recipient;
  HlaTyping typing;
  BloodType blood = BloodType::O;
  std::string ethnicity;
  std::vector<DsaEntry> dsa;  // recipients only

  bool operator==(const PersonRecord&) const = default;
};

/// Blood group probabilities in the order O, A, B, AB.
using BloodDistribution = std::array<double, 4>;

struct EthnicityProfile {
  std::string label;
  double probability = 0.0;
  /// Allele frequencies per locus; slots are drawn i.i.d. from these.
  std::array<std::vector<std::pair<Allele, double>>, kLocusCount> alleles;
  std::optional<BloodDistribution> blood_types;  // falls back to PoolSpec::blood_types
};

struct PoolSpec {
  int target_pair_count = 990;
  int recipient_count = 1332;
  int donor_count = 1401;
  std::vector<EthnicityProfile> ethnicities;
  BloodDistribution blood_types{0.44, 0.42, 0.10, 0.04};
  /// Each of `dsa_candidates` alleles drawn from the population becomes a
  /// DSA of a recipient with probability `dsa_rate` (self antigens skipped).
  double dsa_rate = 0.05;
  int dsa_candidates = 20;
  double dsa_antigen_level_fraction = 0.5;
  LociSet loci = LociSet::full();
  std::uint64_t seed = 1;

  void validate() const;
};

struct ArrivalConfig {
  double horizon = 3650.0;             // days
  double expected_arrivals = 990.0;    // over the horizon
  double departure_hazard = 0.29 / 365.0;  // per pair per day
  std::uint64_t seed = 1;

  void validate() const;
};

struct Population {
  std::vector<PersonRecord> recipients;
  std::vector<PersonRecord> donors;
};

/// Maximum matching in a bipartite graph given as left-side adjacency lists
/// (Hopcroft-Karp). Returns the right partner of each left vertex, or -1.
std::vector<int> maximum_bipartite_matching(std::size_t right_count,
                                            const std::vector<std::vector<int>>& adjacency);

/// Pairs recipients with donors they cannot receive from directly, maximising
/// the number of pairs. Pair ids are 0..k-1 in recipient order; a pair takes
/// its recipient's ethnicity.
std::vector<Pair> max_cardinality_incompatible_pairing(std::span<const PersonRecord> recipients,
                                                       std::span<const PersonRecord> donors,
                                                       const ThresholdConfig& cfg,
                                                       const HlaTables& tables);

/// Antigen-level DSAs and the self-antigen check go through `antigen_map`
/// when it knows the allele; otherwise the allele family is used.
Population generate_synthetic_population(const PoolSpec& spec,
                                         const AlleleToAntigenMap* antigen_map = nullptr);

/// Shuffles the pairs, then gives them Poisson arrivals at rate
/// expected_arrivals / horizon; pairs whose arrival falls at or after the
/// horizon are dropped. Sojourns are exponential with the departure hazard.
/// The result is ordered by pair id.
std::vector<Pair> assign_arrival_departure(std::vector<Pair> pairs, const ArrivalConfig& cfg);

/// Population -> pairing (antigen thresholds of the spec's loci set) ->
/// truncation to target_pair_count. Times are left unassigned.
std::vector<Pair> generate_pairs(const PoolSpec& spec, const HlaTables& tables);

/// Throws InvariantViolation on duplicate ids or arrival >= departure.
void validate_pool(std::span<const Pair> pairs);

}  // namespace kep
