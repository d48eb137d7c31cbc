// compatibility.cpp
#include "kep/compatibility.hpp"

#include <algorithm>
#include <numeric>

#include "kep/error.hpp"

namespace kep {

std::string_view blood_type_name(BloodType type) {
  switch (type) {
    case BloodType::O: return "O";
    case BloodType::A: return "A";
    case BloodType::B: return "B";
    case BloodType::AB: return "AB";
  }
  return "?";
}

std::optional<BloodType> parse_blood_type(std::string_view text) {
  for (const auto t : {BloodType::O, BloodType::A, BloodType::B, BloodType::AB}) {
    if (blood_type_name(t) == text) return t;
  }
  return std::nullopt;
}

bool abo_compatible(BloodType donor, BloodType recipient) {
  if (donor == BloodType::O || recipient == BloodType::AB) return true;
  return donor == recipient;
}

std::string_view paradigm_name(Paradigm paradigm) {
  switch (paradigm) {
    case Paradigm::Antigen: return "antigen";
    case Paradigm::Allele: return "allele";
    case Paradigm::Eplet: return "eplet";
  }
  return "?";
}

Paradigm parse_paradigm(std::string_view text) {
  for (const Paradigm p : kAllParadigms) {
    if (paradigm_name(p) == text) return p;
  }
  throw ConfigError("unknown paradigm '" + std::string(text) + "' (expected antigen|allele|eplet)");
}

int max_score(Paradigm paradigm, const LociSet& loci) {
  switch (paradigm) {
    case Paradigm::Antigen: return loci.z_antigen();
    case Paradigm::Allele: return loci.z_allele();
    case Paradigm::Eplet:
      if (!loci.supports_eplets()) {
        throw EpletsUndefined("eplet scores are not defined for loci set " + loci.name());
      }
      return *loci.z_eplet();
  }
  return 0;
}

ThresholdConfig ThresholdConfig::defaults(Paradigm paradigm, const LociSet& loci) {
  ThresholdConfig cfg{paradigm, loci, 0};
  const auto name = loci.name();
  if (name == "full") {
    cfg.min_score = paradigm == Paradigm::Antigen ? 3 : paradigm == Paradigm::Allele ? 2 : 82;
  } else if (name == "bdrdq") {
    if (paradigm == Paradigm::Eplet) {
      throw EpletsUndefined("eplet scores are not defined for loci set " + name);
    }
    cfg.min_score = paradigm == Paradigm::Antigen ? 2 : 1;
  } else if (name == "drdq") {
    cfg.min_score = paradigm == Paradigm::Antigen ? 2 : paradigm == Paradigm::Allele ? 1 : 45;
  } else {
    max_score(paradigm, loci);
    cfg.min_score = 0;
  }
  return cfg;
}

void ThresholdConfig::validate() const {
  const int z = max_score(paradigm, loci);
  if (min_score < 0 || min_score > z) {
    throw ConfigError("minimum score " + std::to_string(min_score) + " outside [0, " +
                      std::to_string(z) + "] for paradigm " + std::string(paradigm_name(paradigm)));
  }
}

bool dsa_incompatible(std::span<const DsaEntry> dsa, const HlaTyping& donor,
                      const AlleleToAntigenMap& map) {
  for (const auto& entry : dsa) {
    const Allele& antibody = entry.allele;
    if (!donor.has(antibody.locus)) continue;
    for (const Allele& slot : donor.at(antibody.locus)) {
      bool hit;
      if (antibody.allele_level() && slot.allele_level()) {
        hit = antibody == slot;
      } else if (!antibody.allele_level() && !slot.allele_level()) {
        hit = antibody.family == slot.family;
      } else if (antibody.allele_level()) {
        hit = map.antigen_of(antibody) == slot.family;
      } else {
        hit = antibody.family == map.antigen_of(slot);
      }
      if (hit) return true;
    }
  }
  return false;
}

int paradigm_score(Paradigm paradigm, const HlaTyping& donor, const HlaTyping& recipient,
                   const LociSet& loci, const HlaTables& tables) {
  switch (paradigm) {
    case Paradigm::Antigen: return antigen_match_score(donor, recipient, loci, tables.antigen_map);
    case Paradigm::Allele: return allele_match_score(donor, recipient, loci);
    case Paradigm::Eplet: return eplet_match_score(donor, recipient, tables.eplets, loci);
  }
  return 0;
}

bool donor_compatible(const HlaTyping& donor, BloodType donor_blood, const HlaTyping& recipient,
                      BloodType recipient_blood, std::span<const DsaEntry> recipient_dsa,
                      const ThresholdConfig& cfg, const HlaTables& tables) {
  if (!abo_compatible(donor_blood, recipient_blood)) return false;
  if (dsa_incompatible(recipient_dsa, donor, tables.antigen_map)) return false;
  return paradigm_score(cfg.paradigm, donor, recipient, cfg.loci, tables) >= cfg.min_score;
}

bool pair_compatible(const Pair& i, const Pair& j, const ThresholdConfig& cfg,
                     const HlaTables& tables) {
  return donor_compatible(i.donor_typing, i.donor_blood, j.recipient_typing, j.recipient_blood,
                          j.dsa, cfg, tables);
}

std::optional<int> ArcScores::get(Paradigm paradigm) const {
  switch (paradigm) {
    case Paradigm::Antigen: return antigen;
    case Paradigm::Allele: return allele;
    case Paradigm::Eplet: return eplet;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Graph

CompatibilityGraph::CompatibilityGraph(ThresholdConfig cfg, std::vector<PairId> ids,
                                       std::vector<std::string> labels, std::vector<Arc> arcs)
    : cfg_(std::move(cfg)), ids_(std::move(ids)), labels_(std::move(labels)), arcs_(std::move(arcs)) {
  if (labels_.size() != ids_.size()) throw InvariantViolation("one label per node required");
  if (!std::is_sorted(ids_.begin(), ids_.end()) ||
      std::adjacent_find(ids_.begin(), ids_.end()) != ids_.end()) {
    throw InvariantViolation("graph node ids must be unique and sorted");
  }
  std::sort(arcs_.begin(), arcs_.end(), [](const Arc& a, const Arc& b) {
    return std::tie(a.from, a.to) < std::tie(b.from, b.to);
  });
  row_start_.assign(ids_.size() + 1, 0);
  for (const Arc& a : arcs_) {
    if (a.from >= ids_.size() || a.to >= ids_.size() || a.from == a.to) {
      throw InvariantViolation("arc endpoints out of range or self-arc");
    }
    ++row_start_[a.from + 1];
  }
  std::partial_sum(row_start_.begin(), row_start_.end(), row_start_.begin());
}

std::optional<std::uint32_t> CompatibilityGraph::index_of(PairId id) const {
  const auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
  if (it == ids_.end() || *it != id) return std::nullopt;
  return static_cast<std::uint32_t>(it - ids_.begin());
}

std::span<const Arc> CompatibilityGraph::out_arcs(std::uint32_t node) const {
  return std::span<const Arc>(arcs_).subspan(row_start_[node],
                                             row_start_[node + 1] - row_start_[node]);
}

const Arc* CompatibilityGraph::find(std::uint32_t from, std::uint32_t to) const {
  const auto row = out_arcs(from);
  const auto it = std::lower_bound(row.begin(), row.end(), to,
                                   [](const Arc& a, std::uint32_t t) { return a.to < t; });
  return (it != row.end() && it->to == to) ? &*it : nullptr;
}

namespace {

// Interned view of a donor typing over all loci, used for DSA checks.
struct DonorSlots {
  struct Slot {
    std::uint32_t allele = HlaProfile::kNone;   // kNone at antigen level
    std::uint32_t antigen = HlaProfile::kNone;  // kNone when unmapped
  };
  std::array<std::vector<Slot>, kLocusCount> loci;
};

struct Antibody {
  Locus locus;
  std::uint32_t allele = HlaProfile::kNone;
  std::uint32_t antigen = HlaProfile::kNone;
};

std::uint32_t intern_allele(const Allele& a, NameInterner& names) {
  return names.intern(a.family + "*" + *a.subtype);
}

DonorSlots donor_slots(const HlaTyping& typing, const AlleleToAntigenMap& map, NameInterner& names) {
  DonorSlots out;
  for (const Locus l : kAllLoci) {
    if (!typing.has(l)) continue;
    for (const Allele& a : typing.at(l)) {
      DonorSlots::Slot s;
      if (a.allele_level()) {
        s.allele = intern_allele(a, names);
        if (map.contains(a)) s.antigen = names.intern(map.antigen_of(a));
      } else {
        s.antigen = names.intern(a.family);
      }
      out.loci[locus_index(l)].push_back(s);
    }
  }
  return out;
}

std::vector<Antibody> antibodies(std::span<const DsaEntry> dsa, const AlleleToAntigenMap& map,
                                 NameInterner& names) {
  std::vector<Antibody> out;
  for (const auto& e : dsa) {
    Antibody ab{e.allele.locus};
    if (e.allele.allele_level()) {
      ab.allele = intern_allele(e.allele, names);
      if (map.contains(e.allele)) ab.antigen = names.intern(map.antigen_of(e.allele));
    } else {
      ab.antigen = names.intern(e.allele.family);
    }
    out.push_back(ab);
  }
  return out;
}

// Same rule as dsa_incompatible on interned codes. Returns nullopt when a
// mapping needed for the decision is missing.
std::optional<bool> fast_dsa_hit(const std::vector<Antibody>& abs, const DonorSlots& donor) {
  for (const auto& ab : abs) {
    for (const auto& slot : donor.loci[locus_index(ab.locus)]) {
      const bool ab_allele = ab.allele != HlaProfile::kNone;
      const bool slot_allele = slot.allele != HlaProfile::kNone;
      if (ab_allele && slot_allele) {
        if (ab.allele == slot.allele) return true;
        continue;
      }
      if (ab.antigen == HlaProfile::kNone || slot.antigen == HlaProfile::kNone) return std::nullopt;
      if (ab.antigen == slot.antigen) return true;
    }
  }
  return false;
}

const std::string& profile_error(const HlaProfile& p, Paradigm paradigm) {
  switch (paradigm) {
    case Paradigm::Antigen: return p.antigen_error;
    case Paradigm::Allele: return p.allele_error;
    case Paradigm::Eplet: return p.eplet_error;
  }
  return p.antigen_error;
}

}  // namespace

CompatibilityGraph build_graph(std::span<const Pair> pairs, const ThresholdConfig& cfg,
                               const HlaTables& tables) {
  cfg.validate();
  std::vector<const Pair*> sorted;
  sorted.reserve(pairs.size());
  for (const Pair& p : pairs) sorted.push_back(&p);
  std::sort(sorted.begin(), sorted.end(), [](const Pair* a, const Pair* b) { return a->id < b->id; });
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    if (sorted[k - 1]->id == sorted[k]->id) {
      throw InvariantViolation("duplicate pair id " + std::to_string(sorted[k]->id));
    }
  }

  const std::size_t n = sorted.size();
  NameInterner names;
  std::vector<HlaProfile> donors(n), recipients(n);
  std::vector<DonorSlots> donor_view(n);
  std::vector<std::vector<Antibody>> dsa_view(n);
  std::vector<std::string> errors;
  for (std::size_t k = 0; k < n; ++k) {
    const Pair& p = *sorted[k];
    donors[k] = make_profile(p.donor_typing, cfg.loci, tables, names);
    recipients[k] = make_profile(p.recipient_typing, cfg.loci, tables, names);
    donor_view[k] = donor_slots(p.donor_typing, tables.antigen_map, names);
    dsa_view[k] = antibodies(p.dsa, tables.antigen_map, names);
    const auto& de = profile_error(donors[k], cfg.paradigm);
    const auto& re = profile_error(recipients[k], cfg.paradigm);
    if (!de.empty()) errors.push_back("pair " + std::to_string(p.id) + " donor: " + de);
    if (!re.empty()) errors.push_back("pair " + std::to_string(p.id) + " recipient: " + re);
  }

  std::vector<Arc> arcs;
  if (errors.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;
        const Pair& di = *sorted[i];
        const Pair& rj = *sorted[j];
        if (!abo_compatible(di.donor_blood, rj.recipient_blood)) continue;
        bool blocked;
        if (const auto fast = fast_dsa_hit(dsa_view[j], donor_view[i])) {
          blocked = *fast;
        } else {
          try {
            blocked = dsa_incompatible(rj.dsa, di.donor_typing, tables.antigen_map);
          } catch (const Error& e) {
            errors.push_back("pair " + std::to_string(rj.id) + " DSA vs donor of pair " +
                             std::to_string(di.id) + ": " + e.what());
            continue;
          }
        }
        if (blocked) continue;

        ArcScores s;
        const HlaProfile& d = donors[i];
        const HlaProfile& r = recipients[j];
        if (d.antigen_ok() && r.antigen_ok()) s.antigen = antigen_score(d, r, cfg.loci);
        if (d.allele_ok() && r.allele_ok()) s.allele = allele_score(d, r, cfg.loci);
        if (d.eplet_ok() && r.eplet_ok()) s.eplet = eplet_score(d, r, cfg.loci);
        if (*s.get(cfg.paradigm) < cfg.min_score) continue;
        arcs.push_back(Arc{static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j), s});
      }
    }
  }

  if (!errors.empty()) {
    std::string msg = std::to_string(errors.size()) + " scoring error(s)";
    for (std::size_t k = 0; k < errors.size() && k < 10; ++k) msg += "; " + errors[k];
    throw GraphBuildError(msg);
  }

  std::vector<PairId> ids;
  std::vector<std::string> labels;
  for (const Pair* p : sorted) {
    ids.push_back(p->id);
    labels.push_back(p->ethnicity);
  }
  return CompatibilityGraph(cfg, std::move(ids), std::move(labels), std::move(arcs));
}

}  // namespace kep
