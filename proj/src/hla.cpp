// hla.cpp
#include "kep/hla.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <iterator>

#include "csv.hpp"
#include "kep/error.hpp"

namespace kep {

namespace {

constexpr std::array<std::string_view, kLocusCount> kLocusNames{"A", "B", "C", "DR", "DQ"};

AlleleKey key_of(const Allele& allele) {
  return {allele.locus, allele.family, allele.subtype.value_or("")};
}

const LocusSlots& require_locus(const HlaTyping& typing, Locus locus, std::string_view role) {
  if (!typing.has(locus)) {
    throw MissingLocus(std::string(role) + " typing has no data at locus " +
                       std::string(locus_name(locus)));
  }
  return typing.at(locus);
}

void require_allele_level(const HlaTyping& typing, Locus locus, std::string_view role) {
  for (const auto& slot : require_locus(typing, locus, role)) {
    if (!slot.allele_level()) {
      throw ResolutionTooLow(std::string(role) + " slot " + slot.to_string() + " at locus " +
                             std::string(locus_name(locus)) + " is antigen-level");
    }
  }
}

std::size_t difference_size(const EpletSet& donor, const EpletSet& recipient) {
  std::size_t count = 0;
  auto r = recipient.begin();
  for (const EpletId e : donor) {
    while (r != recipient.end() && *r < e) ++r;
    if (r == recipient.end() || *r != e) ++count;
  }
  return count;
}

void merge_into(EpletSet& target, std::span<const EpletId> extra) {
  EpletSet merged;
  merged.reserve(target.size() + extra.size());
  std::set_union(target.begin(), target.end(), extra.begin(), extra.end(),
                 std::back_inserter(merged));
  target = std::move(merged);
}

}  // namespace

std::string_view locus_name(Locus locus) { return kLocusNames[locus_index(locus)]; }

std::optional<Locus> parse_locus(std::string_view text) {
  for (const Locus l : kAllLoci) {
    if (kLocusNames[locus_index(l)] == text) return l;
  }
  return std::nullopt;
}

EpletGroup eplet_group_of(Locus locus) {
  switch (locus) {
    case Locus::DR: return EpletGroup::DR;
    case Locus::DQ: return EpletGroup::DQ;
    default: return EpletGroup::ClassI;
  }
}

std::string_view eplet_group_name(EpletGroup group) {
  switch (group) {
    case EpletGroup::ClassI: return "I";
    case EpletGroup::DR: return "DR";
    case EpletGroup::DQ: return "DQ";
  }
  return "?";
}

std::optional<EpletGroup> parse_eplet_group(std::string_view text) {
  for (const EpletGroup g : kAllEpletGroups) {
    if (eplet_group_name(g) == text) return g;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Allele / HlaTyping

Allele Allele::parse(std::string_view text) {
  text = csv::trim(text);
  Allele out;
  std::size_t prefix = 0;
  if (text.starts_with("DR")) {
    out.locus = Locus::DR;
    prefix = 2;
  } else if (text.starts_with("DQ")) {
    out.locus = Locus::DQ;
    prefix = 2;
  } else if (!text.empty() && (text[0] == 'A' || text[0] == 'B' || text[0] == 'C')) {
    out.locus = *parse_locus(text.substr(0, 1));
    prefix = 1;
  } else {
    throw ParseError("cannot determine locus of HLA name '" + std::string(text) + "'");
  }
  const auto rest = text.substr(prefix);
  if (rest.starts_with('*')) {
    const auto subtype = rest.substr(1);
    const auto colon = subtype.find(':');
    if (subtype.empty() || colon == 0 || colon == std::string_view::npos ||
        colon + 1 == subtype.size()) {
      throw ParseError("malformed allele name '" + std::string(text) + "'");
    }
    out.subtype = std::string(subtype);
    out.family = std::string(locus_name(out.locus)) + std::string(subtype.substr(0, colon));
  } else {
    if (rest.empty()) throw ParseError("antigen name '" + std::string(text) + "' has no family");
    out.family = std::string(text);
  }
  return out;
}

std::string Allele::to_string() const {
  if (subtype) return std::string(locus_name(locus)) + "*" + *subtype;
  return family;
}

void HlaTyping::set(Locus locus, Allele first, Allele second) {
  if (first.locus != locus || second.locus != locus) {
    throw InvariantViolation("slot " + first.to_string() + "/" + second.to_string() +
                             " does not belong to locus " + std::string(locus_name(locus)));
  }
  if (first.family.empty() || second.family.empty()) {
    throw InvariantViolation("empty antigen family at locus " + std::string(locus_name(locus)));
  }
  slots_[locus_index(locus)] = LocusSlots{std::move(first), std::move(second)};
}

const LocusSlots& HlaTyping::at(Locus locus) const {
  const auto& s = slots_[locus_index(locus)];
  if (!s) throw MissingLocus("no data at locus " + std::string(locus_name(locus)));
  return *s;
}

bool HlaTyping::allele_level(Locus locus) const {
  const auto& s = slots_[locus_index(locus)];
  return s && (*s)[0].allele_level() && (*s)[1].allele_level();
}

// ---------------------------------------------------------------------------
// LociSet

LociSet::LociSet(std::initializer_list<Locus> loci, std::optional<int> z_eplet) {
  for (const Locus l : loci) mask_ |= static_cast<std::uint8_t>(1U << locus_index(l));
  if (mask_ == 0) throw PreconditionError("loci set must not be empty");
  const int class_one = contains(Locus::A) + contains(Locus::B) + contains(Locus::C);
  const bool eplet_capable = class_one == 0 || class_one == 3;
  if (z_eplet && !eplet_capable) {
    throw EpletsUndefined("loci set " + name() + " splits the class I loci");
  }
  if (z_eplet && *z_eplet <= 0) throw PreconditionError("Z_eplet must be positive");
  z_eplet_ = z_eplet;
}

LociSet LociSet::full(int z_eplet) {
  return LociSet({Locus::A, Locus::B, Locus::C, Locus::DR, Locus::DQ}, z_eplet);
}

LociSet LociSet::b_dr_dq() { return LociSet({Locus::B, Locus::DR, Locus::DQ}, std::nullopt); }

LociSet LociSet::dr_dq(int z_eplet) { return LociSet({Locus::DR, Locus::DQ}, z_eplet); }

LociSet LociSet::parse(std::string_view name) {
  if (name == "full") return full();
  if (name == "bdrdq") return b_dr_dq();
  if (name == "drdq") return dr_dq();
  throw ConfigError("unknown loci set '" + std::string(name) + "' (expected full|bdrdq|drdq)");
}

std::vector<Locus> LociSet::loci() const {
  std::vector<Locus> out;
  for (const Locus l : kAllLoci) {
    if (contains(l)) out.push_back(l);
  }
  return out;
}

int LociSet::size() const { return std::popcount(mask_); }

std::vector<EpletGroup> LociSet::eplet_groups() const {
  std::vector<EpletGroup> out;
  if (contains(Locus::A) && contains(Locus::B) && contains(Locus::C))
    out.push_back(EpletGroup::ClassI);
  if (contains(Locus::DR)) out.push_back(EpletGroup::DR);
  if (contains(Locus::DQ)) out.push_back(EpletGroup::DQ);
  return out;
}

std::string LociSet::name() const {
  if (mask_ == 0b11111) return "full";
  if (mask_ == 0b11010) return "bdrdq";
  if (mask_ == 0b11000) return "drdq";
  std::string out;
  for (const Locus l : loci()) out += (out.empty() ? "" : "+") + std::string(locus_name(l));
  return out;
}

// ---------------------------------------------------------------------------
// Tables

void AlleleToAntigenMap::add(Locus locus, std::string family, std::string subtype,
                             std::string antigen_family) {
  if (family.empty() || subtype.empty() || antigen_family.empty()) {
    throw ParseError("antigen map entries need family, subtype and antigen family");
  }
  const auto [it, inserted] = entries_.emplace(
      AlleleKey{locus, std::move(family), std::move(subtype)}, antigen_family);
  if (!inserted && it->second != antigen_family) {
    throw ParseError("conflicting antigen map entries for " + std::get<1>(it->first) + " " +
                     std::get<2>(it->first));
  }
}

const std::string& AlleleToAntigenMap::antigen_of(const Allele& allele) const {
  const auto it = entries_.find(key_of(allele));
  if (it == entries_.end()) {
    throw MissingMapEntry("no antigen mapping for " + allele.to_string() + " at locus " +
                          std::string(locus_name(allele.locus)));
  }
  return it->second;
}

bool AlleleToAntigenMap::contains(const Allele& allele) const {
  return entries_.contains(key_of(allele));
}

AlleleToAntigenMap AlleleToAntigenMap::read_csv(std::istream& in) {
  AlleleToAntigenMap map;
  csv::for_each_row(in, {"locus", "family", "subtype", "antigen_family"},
                    [&](std::size_t line, const std::vector<std::string>& f) {
                      const auto locus = parse_locus(f[0]);
                      if (!locus) {
                        throw ParseError("line " + std::to_string(line) + ": unknown locus '" +
                                         f[0] + "'");
                      }
                      try {
                        map.add(*locus, f[1], f[2], f[3]);
                      } catch (const ParseError& e) {
                        throw ParseError("line " + std::to_string(line) + ": " + e.what());
                      }
                    });
  return map;
}

AlleleToAntigenMap AlleleToAntigenMap::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open antigen map '" + path + "'");
  return read_csv(in);
}

void EpletRegistry::declare(const Allele& allele) {
  if (!allele.allele_level()) {
    throw ResolutionTooLow("eplet registry entries must be allele-level: " + allele.to_string());
  }
  entries_.try_emplace(key_of(allele));
}

void EpletRegistry::add(const Allele& allele, std::string_view eplet, EpletGroup group) {
  if (group != eplet_group_of(allele.locus)) {
    throw ParseError("eplet " + std::string(eplet) + " listed in group " +
                     std::string(eplet_group_name(group)) + " for allele " + allele.to_string());
  }
  declare(allele);
  const std::string name(eplet);
  auto it = index_.find(name);
  EpletId id;
  if (it == index_.end()) {
    id = static_cast<EpletId>(names_.size());
    names_.push_back(name);
    groups_.push_back(group);
    index_.emplace(name, id);
  } else {
    id = it->second;
    if (groups_[id] != group) {
      throw ParseError("eplet " + name + " appears in more than one class group");
    }
  }
  auto& set = entries_[key_of(allele)];
  const auto pos = std::lower_bound(set.begin(), set.end(), id);
  if (pos == set.end() || *pos != id) set.insert(pos, id);
}

std::span<const EpletId> EpletRegistry::eplets_of(const Allele& allele) const {
  if (!allele.allele_level()) {
    throw ResolutionTooLow("eplets need allele-level typing, got " + allele.to_string());
  }
  const auto it = entries_.find(key_of(allele));
  if (it == entries_.end()) {
    throw MissingRegistryEntry("allele " + allele.to_string() + " is not in the eplet registry");
  }
  return it->second;
}

bool EpletRegistry::contains(const Allele& allele) const {
  return allele.allele_level() && entries_.contains(key_of(allele));
}

EpletRegistry EpletRegistry::read_csv(std::istream& in) {
  EpletRegistry registry;
  csv::for_each_row(
      in, {"locus", "family", "subtype", "eplet_id", "class_group"},
      [&](std::size_t line, const std::vector<std::string>& f) {
        const auto where = "line " + std::to_string(line) + ": ";
        const auto locus = parse_locus(f[0]);
        if (!locus) throw ParseError(where + "unknown locus '" + f[0] + "'");
        if (f[1].empty() || f[2].empty()) throw ParseError(where + "family and subtype required");
        Allele allele{*locus, f[1], f[2]};
        try {
          if (f[3].empty()) {
            registry.declare(allele);
          } else {
            const auto group = parse_eplet_group(f[4]);
            if (!group) throw ParseError("unknown class group '" + f[4] + "'");
            registry.add(allele, f[3], *group);
          }
        } catch (const Error& e) {
          throw ParseError(where + e.what());
        }
      });
  return registry;
}

EpletRegistry EpletRegistry::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open eplet registry '" + path + "'");
  return read_csv(in);
}

// ---------------------------------------------------------------------------
// Scoring

HlaTyping derive_antigen_typing(const HlaTyping& typing, const AlleleToAntigenMap& map) {
  HlaTyping out;
  for (const Locus l : kAllLoci) {
    if (!typing.has(l)) continue;
    const auto& slots = typing.at(l);
    std::array<Allele, 2> reduced;
    for (std::size_t k = 0; k < 2; ++k) {
      reduced[k] = slots[k].allele_level() ? Allele{l, map.antigen_of(slots[k]), std::nullopt}
                                           : slots[k];
    }
    out.set(l, std::move(reduced[0]), std::move(reduced[1]));
  }
  return out;
}

int antigen_match_score(const HlaTyping& donor, const HlaTyping& recipient, const LociSet& loci,
                        const AlleleToAntigenMap& map) {
  int mismatches = 0;
  for (const Locus l : loci.loci()) {
    const auto& d = require_locus(donor, l, "donor");
    const auto& r = require_locus(recipient, l, "recipient");
    auto antigen = [&](const Allele& a) -> const std::string& {
      return a.allele_level() ? map.antigen_of(a) : a.family;
    };
    const std::string& r0 = antigen(r[0]);
    const std::string& r1 = antigen(r[1]);
    for (const auto& slot : d) {
      const std::string& a = antigen(slot);
      if (a != r0 && a != r1) ++mismatches;
    }
  }
  return loci.z_antigen() - mismatches;
}

int allele_match_score(const HlaTyping& donor, const HlaTyping& recipient, const LociSet& loci) {
  int mismatches = 0;
  for (const Locus l : loci.loci()) {
    require_allele_level(donor, l, "donor");
    require_allele_level(recipient, l, "recipient");
    const auto& r = recipient.at(l);
    for (const auto& slot : donor.at(l)) {
      if (slot != r[0] && slot != r[1]) ++mismatches;
    }
  }
  return loci.z_allele() - mismatches;
}

EpletSet eplet_set(const HlaTyping& typing, const EpletRegistry& registry, EpletGroup group,
                   const LociSet& loci) {
  EpletSet out;
  for (const Locus l : loci.loci()) {
    if (eplet_group_of(l) != group) continue;
    require_allele_level(typing, l, "typing");
    for (const auto& slot : typing.at(l)) merge_into(out, registry.eplets_of(slot));
  }
  return out;
}

int eplet_match_score(const HlaTyping& donor, const HlaTyping& recipient,
                      const EpletRegistry& registry, const LociSet& loci) {
  if (!loci.supports_eplets()) {
    throw EpletsUndefined("eplet scores are not defined for loci set " + loci.name());
  }
  std::size_t load = 0;
  for (const EpletGroup g : loci.eplet_groups()) {
    load += difference_size(eplet_set(donor, registry, g, loci),
                            eplet_set(recipient, registry, g, loci));
  }
  return std::max(0, *loci.z_eplet() - static_cast<int>(load));
}

// ---------------------------------------------------------------------------
// Profiles

std::uint32_t NameInterner::intern(const std::string& name) {
  const auto [it, inserted] = ids_.emplace(name, static_cast<std::uint32_t>(ids_.size()));
  return it->second;
}

HlaProfile make_profile(const HlaTyping& typing, const LociSet& loci, const HlaTables& tables,
                        NameInterner& names) {
  HlaProfile p;
  for (auto& a : p.antigen) a.fill(HlaProfile::kNone);
  for (auto& a : p.allele) a.fill(HlaProfile::kNone);

  for (const Locus l : loci.loci()) {
    if (!typing.has(l)) {
      const auto msg = "missing locus " + std::string(locus_name(l));
      p.antigen_error = p.allele_error = p.eplet_error = msg;
      return p;
    }
    const auto& slots = typing.at(l);
    for (std::size_t k = 0; k < 2; ++k) {
      const Allele& s = slots[k];
      if (s.allele_level()) {
        p.allele[locus_index(l)][k] = names.intern(s.family + "*" + *s.subtype);
        if (tables.antigen_map.contains(s)) {
          p.antigen[locus_index(l)][k] = names.intern(tables.antigen_map.antigen_of(s));
        } else if (p.antigen_error.empty()) {
          p.antigen_error = "no antigen mapping for " + s.to_string();
        }
      } else {
        p.antigen[locus_index(l)][k] = names.intern(s.family);
        if (p.allele_error.empty()) p.allele_error = "antigen-level slot " + s.to_string();
      }
    }
  }

  if (!loci.supports_eplets()) {
    p.eplet_error = "eplet scores are not defined for loci set " + loci.name();
  } else if (!p.allele_error.empty()) {
    p.eplet_error = p.allele_error;
  } else {
    try {
      for (const EpletGroup g : loci.eplet_groups()) {
        p.eplets[static_cast<std::size_t>(g)] = eplet_set(typing, tables.eplets, g, loci);
      }
    } catch (const Error& e) {
      p.eplet_error = e.what();
    }
  }
  return p;
}

int antigen_score(const HlaProfile& donor, const HlaProfile& recipient, const LociSet& loci) {
  int mismatches = 0;
  for (const Locus l : loci.loci()) {
    const auto& r = recipient.antigen[locus_index(l)];
    for (const auto code : donor.antigen[locus_index(l)]) {
      if (code != r[0] && code != r[1]) ++mismatches;
    }
  }
  return loci.z_antigen() - mismatches;
}

int allele_score(const HlaProfile& donor, const HlaProfile& recipient, const LociSet& loci) {
  int mismatches = 0;
  for (const Locus l : loci.loci()) {
    const auto& r = recipient.allele[locus_index(l)];
    for (const auto code : donor.allele[locus_index(l)]) {
      if (code != r[0] && code != r[1]) ++mismatches;
    }
  }
  return loci.z_allele() - mismatches;
}

int eplet_score(const HlaProfile& donor, const HlaProfile& recipient, const LociSet& loci) {
  std::size_t load = 0;
  for (const EpletGroup g : loci.eplet_groups()) {
    const auto i = static_cast<std::size_t>(g);
    load += difference_size(donor.eplets[i], recipient.eplets[i]);
  }
  return std::max(0, *loci.z_eplet() - static_cast<int>(load));
}

}  // namespace kep
