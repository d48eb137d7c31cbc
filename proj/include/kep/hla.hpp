// hla.hpp
// HLA typings, allele->antigen tables, the eplet registry and the three raw
// match scores (antigen, allele, eplet).
//
// Every score is "maximum minus mismatch load": Z - mismatches, where the
// maximum Z depends on the paradigm and on the loci considered.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace kep {

enum class Locus : std::uint8_t { A = 0, B, C, DR, DQ };

inline constexpr std::size_t kLocusCount = 5;
inline constexpr std::array<Locus, kLocusCount> kAllLoci{Locus::A, Locus::B, Locus::C,
                                                         Locus::DR, Locus::DQ};

std::string_view locus_name(Locus locus);
std::optional<Locus> parse_locus(std::string_view text);
inline std::size_t locus_index(Locus locus) { return static_cast<std::size_t>(locus); }

/// Eplet contexts: the three class I loci are pooled, DR and DQ stand alone.
enum class EpletGroup : std::uint8_t { ClassI = 0, DR, DQ };
inline constexpr std::array<EpletGroup, 3> kAllEpletGroups{EpletGroup::ClassI, EpletGroup::DR,
                                                           EpletGroup::DQ};

EpletGroup eplet_group_of(Locus locus);
std::string_view eplet_group_name(EpletGroup group);
std::optional<EpletGroup> parse_eplet_group(std::string_view text);

/// One HLA slot. Antigen-level data has no subtype ("B07"); allele-level
/// data carries one ("B*07:01", family "B07", subtype "07:01").
struct Allele {
  Locus locus = Locus::A;
  std::string family;
  std::optional<std::string> subtype;

  bool allele_level() const { return subtype.has_value(); }

  /// Parses "B07" (antigen level) or "B*07:01" (allele level). The family of
  /// an allele-level name is the locus followed by the first field.
  static Allele parse(std::string_view text);
  std::string to_string() const;

  auto operator<=>(const Allele&) const = default;
};

using LocusSlots = std::array<Allele, 2>;

/// Two slots for each typed locus. Loci may be absent; scoring over a loci
/// set that includes an absent locus raises MissingLocus.
class HlaTyping {
 public:
  void set(Locus locus, Allele first, Allele second);
  bool has(Locus locus) const { return slots_[locus_index(locus)].has_value(); }
  const LocusSlots& at(Locus locus) const;
  /// True when both slots at the locus are allele-level.
  bool allele_level(Locus locus) const;

  bool operator==(const HlaTyping&) const = default;

 private:
  std::array<std::optional<LocusSlots>, kLocusCount> slots_;
};

/// The loci taken into account together with the maximum score per paradigm.
class LociSet {
 public:
  /// `z_eplet` must be given exactly when the set supports eplet scoring,
  /// i.e. class I loci are either all present or all absent.
  LociSet(std::initializer_list<Locus> loci, std::optional<int> z_eplet);

  static LociSet full(int z_eplet = 138);
  static LociSet b_dr_dq();
  static LociSet dr_dq(int z_eplet = 67);
  /// "full", "bdrdq" or "drdq".
  static LociSet parse(std::string_view name);

  bool contains(Locus locus) const { return (mask_ >> locus_index(locus)) & 1U; }
  std::vector<Locus> loci() const;
  int size() const;
  int z_antigen() const { return 2 * size(); }
  int z_allele() const { return 2 * size(); }
  std::optional<int> z_eplet() const { return z_eplet_; }
  bool supports_eplets() const { return z_eplet_.has_value(); }
  /// Eplet groups whose loci are all inside this set.
  std::vector<EpletGroup> eplet_groups() const;
  std::string name() const;

  bool operator==(const LociSet&) const = default;

 private:
  LociSet() = default;
  std::uint8_t mask_ = 0;
  std::optional<int> z_eplet_;
};

/// Lookup key for allele-level tables: (locus, family, subtype).
using AlleleKey = std::tuple<Locus, std::string, std::string>;

class AlleleToAntigenMap {
 public:
  void add(Locus locus, std::string family, std::string subtype, std::string antigen_family);
  /// Antigen family for an allele-level slot; throws MissingMapEntry.
  const std::string& antigen_of(const Allele& allele) const;
  bool contains(const Allele& allele) const;
  std::size_t size() const { return entries_.size(); }

  /// CSV with header `locus,family,subtype,antigen_family`.
  static AlleleToAntigenMap read_csv(std::istream& in);
  static AlleleToAntigenMap load(const std::string& path);

 private:
  std::map<AlleleKey, std::string> entries_;
};

using EpletId = std::uint32_t;
using EpletSet = std::vector<EpletId>;  // sorted, unique

class EpletRegistry {
 public:
  /// Registers the allele with no eplets if it is new.
  void declare(const Allele& allele);
  /// Adds one eplet to an allele. The group must match the allele's locus and
  /// an eplet name may only ever appear in one group.
  void add(const Allele& allele, std::string_view eplet, EpletGroup group);

  /// Eplets carried by an allele-level slot. Throws ResolutionTooLow for an
  /// antigen-level slot and MissingRegistryEntry for an unknown allele.
  std::span<const EpletId> eplets_of(const Allele& allele) const;
  bool contains(const Allele& allele) const;

  const std::string& eplet_name(EpletId id) const { return names_.at(id); }
  EpletGroup eplet_group(EpletId id) const { return groups_.at(id); }
  std::size_t eplet_count() const { return names_.size(); }
  std::size_t allele_count() const { return entries_.size(); }

  /// CSV with header `locus,family,subtype,eplet_id,class_group`. A row with an
  /// empty eplet_id registers the allele with no eplets.
  static EpletRegistry read_csv(std::istream& in);
  static EpletRegistry load(const std::string& path);

 private:
  std::map<AlleleKey, EpletSet> entries_;
  std::vector<std::string> names_;
  std::vector<EpletGroup> groups_;
  std::unordered_map<std::string, EpletId> index_;
};

/// Reduces every slot to antigen level through the map. Antigen-level slots
/// pass through unchanged.
HlaTyping derive_antigen_typing(const HlaTyping& typing, const AlleleToAntigenMap& map);

int antigen_match_score(const HlaTyping& donor, const HlaTyping& recipient, const LociSet& loci,
                        const AlleleToAntigenMap& map);

int allele_match_score(const HlaTyping& donor, const HlaTyping& recipient, const LociSet& loci);

EpletSet eplet_set(const HlaTyping& typing, const EpletRegistry& registry, EpletGroup group,
                   const LociSet& loci);

/// Z_eplet minus the summed per-group eplet mismatch load, floored at zero.
int eplet_match_score(const HlaTyping& donor, const HlaTyping& recipient,
                      const EpletRegistry& registry, const LociSet& loci);

/// Interns antigen and allele names so repeated scoring compares integers.
class NameInterner {
 public:
  std::uint32_t intern(const std::string& name);

 private:
  std::unordered_map<std::string, std::uint32_t> ids_;
};

/// Per-person data precomputed for one loci set. Parts that cannot be
/// computed (missing map entry, antigen-level data, unknown eplets) are
/// recorded as an error string instead of throwing, so callers can decide
/// whether the paradigm in question is required.
struct HlaProfile {
  static constexpr std::uint32_t kNone = UINT32_MAX;

  std::array<std::array<std::uint32_t, 2>, kLocusCount> antigen{};
  std::array<std::array<std::uint32_t, 2>, kLocusCount> allele{};
  std::array<EpletSet, 3> eplets;

  std::string antigen_error;
  std::string allele_error;
  std::string eplet_error;

  bool antigen_ok() const { return antigen_error.empty(); }
  bool allele_ok() const { return allele_error.empty(); }
  bool eplet_ok() const { return eplet_error.empty(); }
};

struct HlaTables {
  AlleleToAntigenMap antigen_map;
  EpletRegistry eplets;
};

HlaProfile make_profile(const HlaTyping& typing, const LociSet& loci, const HlaTables& tables,
                        NameInterner& names);

/// Profile-based scoring; callers must check the matching *_ok() flags.
int antigen_score(const HlaProfile& donor, const HlaProfile& recipient, const LociSet& loci);
int allele_score(const HlaProfile& donor, const HlaProfile& recipient, const LociSet& loci);
int eplet_score(const HlaProfile& donor, const HlaProfile& recipient, const LociSet& loci);

}  // namespace kep
