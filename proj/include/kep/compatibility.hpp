// compatibility.hpp
// Donor/recipient compatibility (ABO, donor-specific antibodies, HLA score
// thresholds) and the compatibility graph between recipient-donor pairs.
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kep/hla.hpp"

namespace kep {

enum class BloodType : std::uint8_t { O, A, B, AB };

std::string_view blood_type_name(BloodType type);
std::optional<BloodType> parse_blood_type(std::string_view text);

/// O donates to everyone, AB receives from everyone.
bool abo_compatible(BloodType donor, BloodType recipient);

/// A recipient antibody against one HLA antigen (no subtype) or allele.
struct DsaEntry {
  Allele allele;
  bool operator==(const DsaEntry&) const = default;
};

using PairId = std::uint32_t;

inline constexpr double kNever = std::numeric_limits<double>::infinity();

struct Pair {
  PairId id = 0;
  HlaTyping recipient_typing;
  HlaTyping donor_typing;
  BloodType recipient_blood = BloodType::O;
  BloodType donor_blood = BloodType::O;
  std::string ethnicity;
  std::vector<DsaEntry> dsa;
  double arrival = 0.0;        // days
  double departure = kNever;   // days; kNever until times are assigned

  bool operator==(const Pair&) const = default;
};

enum class Paradigm : std::uint8_t { Antigen = 0, Allele, Eplet };
inline constexpr std::array<Paradigm, 3> kAllParadigms{Paradigm::Antigen, Paradigm::Allele,
                                                       Paradigm::Eplet};

std::string_view paradigm_name(Paradigm paradigm);
Paradigm parse_paradigm(std::string_view text);

/// Maximum attainable score under a paradigm; throws EpletsUndefined for
/// eplets on a loci set without eplet support.
int max_score(Paradigm paradigm, const LociSet& loci);

struct ThresholdConfig {
  Paradigm paradigm = Paradigm::Antigen;
  LociSet loci = LociSet::full();
  int min_score = 3;

  /// Minimum scores 3/2/82 (full), 2/1/- (B,DR,DQ) and 2/1/45 (DR,DQ).
  static ThresholdConfig defaults(Paradigm paradigm, const LociSet& loci);
  void validate() const;
};

/// True when some DSA hits some donor slot at the same locus:
///  (i)   allele DSA equal to an allele-level donor slot,
///  (ii)  antigen DSA equal to an antigen-level donor slot,
///  (iii) allele DSA whose mapped antigen equals an antigen-level donor slot,
///  (iv)  antigen DSA equal to the mapped antigen of an allele-level slot.
/// Two different alleles of the same family do not conflict.
bool dsa_incompatible(std::span<const DsaEntry> dsa, const HlaTyping& donor,
                      const AlleleToAntigenMap& map);

/// Score of `donor` against `recipient` under one paradigm.
int paradigm_score(Paradigm paradigm, const HlaTyping& donor, const HlaTyping& recipient,
                   const LociSet& loci, const HlaTables& tables);

/// Direct donor -> recipient check. Time windows are not considered.
bool donor_compatible(const HlaTyping& donor, BloodType donor_blood, const HlaTyping& recipient,
                      BloodType recipient_blood, std::span<const DsaEntry> recipient_dsa,
                      const ThresholdConfig& cfg, const HlaTables& tables);

/// Donor of `i` towards recipient of `j`.
bool pair_compatible(const Pair& i, const Pair& j, const ThresholdConfig& cfg,
                     const HlaTables& tables);

struct ArcScores {
  std::optional<int> antigen;
  std::optional<int> allele;
  std::optional<int> eplet;

  std::optional<int> get(Paradigm paradigm) const;
  bool operator==(const ArcScores&) const = default;
};

struct Arc {
  std::uint32_t from = 0;  // node index; donor side
  std::uint32_t to = 0;    // node index; recipient side
  ArcScores scores;
};

/// Nodes are sorted by pair id; arcs are sorted by (from, to).
class CompatibilityGraph {
 public:
  CompatibilityGraph() = default;
  CompatibilityGraph(ThresholdConfig cfg, std::vector<PairId> ids, std::vector<std::string> labels,
                     std::vector<Arc> arcs);

  std::size_t node_count() const { return ids_.size(); }
  std::size_t arc_count() const { return arcs_.size(); }
  PairId node_id(std::uint32_t node) const { return ids_[node]; }
  const std::string& node_label(std::uint32_t node) const { return labels_[node]; }
  const std::vector<PairId>& node_ids() const { return ids_; }
  std::optional<std::uint32_t> index_of(PairId id) const;

  std::span<const Arc> arcs() const { return arcs_; }
  std::span<const Arc> out_arcs(std::uint32_t node) const;
  const Arc* find(std::uint32_t from, std::uint32_t to) const;
  bool has_arc(std::uint32_t from, std::uint32_t to) const { return find(from, to) != nullptr; }

  const ThresholdConfig& config() const { return cfg_; }

 private:
  ThresholdConfig cfg_;
  std::vector<PairId> ids_;
  std::vector<std::string> labels_;
  std::vector<Arc> arcs_;
  std::vector<std::size_t> row_start_;
};

/// All arcs i -> j (i != j) passing ABO, DSA and the active threshold. Every
/// arc records every paradigm score that can be computed for it; errors under
/// the active paradigm are collected and reported together.
CompatibilityGraph build_graph(std::span<const Pair> pairs, const ThresholdConfig& cfg,
                               const HlaTables& tables);

}  // namespace kep
