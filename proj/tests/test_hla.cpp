#include <doctest.h>

#include <map>
#include <set>
#include <fstream>
#include <sstream>

#include "kep/error.hpp"
#include "kep/compatibility.hpp"
#include "kep/hla.hpp"
#include "support.hpp"

using namespace kep;
using kep::testing::typing;

namespace {

AlleleToAntigenMap small_map() {
  AlleleToAntigenMap m;
  m.add(Locus::A, "A01", "01:01", "A01");
  m.add(Locus::A, "A02", "02:01", "A02");
  m.add(Locus::A, "A03", "03:01", "A03");
  m.add(Locus::B, "B07", "07:01", "B07");
  m.add(Locus::B, "B07", "07:02", "B07");
  m.add(Locus::B, "B08", "08:01", "B08");
  m.add(Locus::B, "B15", "15:01", "B62");
  return m;
}

}  // namespace

TEST_CASE("allele names parse into locus, family and subtype") {
  const Allele a = Allele::parse("B*07:01");
  CHECK(a.locus == Locus::B);
  CHECK(a.family == "B07");
  CHECK(a.subtype == "07:01");
  CHECK(a.to_string() == "B*07:01");

  const Allele b = Allele::parse("DQ07");
  CHECK(b.locus == Locus::DQ);
  CHECK(b.family == "DQ07");
  CHECK_FALSE(b.allele_level());

  CHECK_THROWS(Allele::parse("X*01:01"));
  CHECK_THROWS(Allele::parse(""));
}

TEST_CASE("loci sets carry the maximum scores") {
  CHECK(LociSet::full().z_antigen() == 10);
  CHECK(LociSet::full().z_allele() == 10);
  CHECK(LociSet::full().z_eplet() == 138);
  CHECK(LociSet::dr_dq().z_antigen() == 4);
  CHECK(LociSet::dr_dq().z_eplet() == 67);
  CHECK(LociSet::b_dr_dq().z_antigen() == 6);
  CHECK_FALSE(LociSet::b_dr_dq().supports_eplets());
  CHECK_THROWS_AS(LociSet({Locus::B, Locus::DR}, 50), EpletsUndefined);
  CHECK(LociSet::parse("drdq") == LociSet::dr_dq());
  CHECK_THROWS_AS(LociSet::parse("abc"), ConfigError);
}

TEST_CASE("derive_antigen_typing maps allele slots and keeps antigen slots") {
  const auto m = small_map();
  const auto t = derive_antigen_typing(typing({"B*07:01", "B*15:01"}), m);
  CHECK(t.at(Locus::B)[0].to_string() == "B07");
  CHECK(t.at(Locus::B)[1].to_string() == "B62");

  const auto same = derive_antigen_typing(typing({"B07", "B08"}), m);
  CHECK(same == typing({"B07", "B08"}));
  CHECK(derive_antigen_typing(t, m) == t);

  CHECK_THROWS_AS(derive_antigen_typing(typing({"C*05:99", "C*05:99"}), m), MissingMapEntry);
}

TEST_CASE("antigen scores count donor slots missing from the recipient") {
  const auto m = small_map();
  const LociSet b({Locus::B}, std::nullopt);
  const LociSet a({Locus::A}, std::nullopt);
  // Homozygous donor, both slots mismatched.
  CHECK(antigen_match_score(typing({"B07", "B07"}), typing({"B08", "B44"}), b, m) == 0);
  CHECK(antigen_match_score(typing({"A01", "A02"}), typing({"A02", "A03"}), a, m) == 1);
  // Allele-level slots compare through the map.
  CHECK(antigen_match_score(typing({"B*07:01", "B*08:01"}), typing({"B*07:02", "B44"}), b, m) == 1);

  const auto full = typing({"A*01:01", "A*02:01", "B*07:01", "B*08:01", "C01", "C02", "DR01",
                            "DR03", "DQ02", "DQ05"});
  CHECK(antigen_match_score(full, full, LociSet::full(), m) == 10);
  CHECK_THROWS_AS(antigen_match_score(typing({"A01", "A02"}), full, LociSet::full(), m),
                  MissingLocus);
}

TEST_CASE("allele scores need exact subtypes") {
  const LociSet b({Locus::B}, std::nullopt);
  CHECK(allele_match_score(typing({"B*07:01", "B*08:01"}), typing({"B*07:02", "B*08:01"}), b) == 1);
  const auto t = typing({"A*01:01", "A*02:01", "B*07:01", "B*08:01", "C*01:02", "C*02:02",
                         "DR*01:01", "DR*03:01", "DQ*02:01", "DQ*05:01"});
  CHECK(allele_match_score(t, t, LociSet::full()) == 10);
  CHECK_THROWS_AS(allele_match_score(typing({"B07", "B*08:01"}), typing({"B*07:02", "B*08:01"}), b),
                  ResolutionTooLow);
}

TEST_CASE("allele mismatches never undercount antigen mismatches") {
  // Every allele maps into its own family here.
  AlleleToAntigenMap m;
  const char* names[] = {"A*01:01", "A*01:02", "A*02:01", "A*02:05", "A*03:01"};
  for (const char* n : names) {
    const Allele a = Allele::parse(n);
    m.add(a.locus, a.family, *a.subtype, a.family);
  }
  const LociSet a({Locus::A}, std::nullopt);
  Rng rng(5);
  for (int k = 0; k < 500; ++k) {
    auto pick = [&] { return names[rng.index(5)]; };
    const auto d = typing({pick(), pick()});
    const auto r = typing({pick(), pick()});
    CHECK(allele_match_score(d, r, a) <= antigen_match_score(d, r, a, m));
  }
}

TEST_CASE("eplet sets are unions of registry entries") {
  EpletRegistry reg;
  reg.add(Allele::parse("A*01:01"), "e1", EpletGroup::ClassI);
  reg.add(Allele::parse("A*01:01"), "e2", EpletGroup::ClassI);
  reg.add(Allele::parse("A*02:01"), "e2", EpletGroup::ClassI);
  reg.add(Allele::parse("A*02:01"), "e3", EpletGroup::ClassI);
  reg.declare(Allele::parse("A*03:01"));
  const LociSet a({Locus::A, Locus::B, Locus::C}, 10);

  auto names = [&](const EpletSet& s) {
    std::set<std::string> out;
    for (const auto id : s) out.insert(reg.eplet_name(id));
    return out;
  };
  const auto t = typing({"A*01:01", "A*02:01", "B*07:01", "B*07:01", "C*01:02", "C*01:02"});
  reg.declare(Allele::parse("B*07:01"));
  reg.declare(Allele::parse("C*01:02"));
  CHECK(names(eplet_set(t, reg, EpletGroup::ClassI, a)) == std::set<std::string>{"e1", "e2", "e3"});
  const auto homo = typing({"A*01:01", "A*01:01", "B*07:01", "B*07:01", "C*01:02", "C*01:02"});
  CHECK(names(eplet_set(homo, reg, EpletGroup::ClassI, a)) == std::set<std::string>{"e1", "e2"});
  const auto empty = typing({"A*03:01", "A*03:01", "B*07:01", "B*07:01", "C*01:02", "C*01:02"});
  CHECK(eplet_set(empty, reg, EpletGroup::ClassI, a).empty());

  CHECK_THROWS_AS(reg.eplets_of(Allele::parse("A01")), ResolutionTooLow);
  CHECK_THROWS_AS(reg.eplets_of(Allele::parse("A*09:09")), MissingRegistryEntry);
  // One eplet name, one group.
  CHECK_THROWS(reg.add(Allele::parse("DR*01:01"), "e1", EpletGroup::DR));
}

TEST_CASE("eplet score is Z minus the per-group load") {
  EpletRegistry reg;
  std::vector<std::string> alleles;
  for (const char* l : {"DR", "DQ"}) {
    for (int f = 1; f <= 3; ++f) alleles.push_back(std::string(l) + "*0" + std::to_string(f) + ":01");
  }
  // DR alleles carry d0..d5 windows, DQ alleles q0..q5 windows.
  for (std::size_t k = 0; k < alleles.size(); ++k) {
    const Allele a = Allele::parse(alleles[k]);
    const bool dr = a.locus == Locus::DR;
    for (int e = 0; e < 4; ++e) {
      reg.add(a, std::string(dr ? "d" : "q") + std::to_string((k % 3) + e),
              dr ? EpletGroup::DR : EpletGroup::DQ);
    }
  }
  const auto donor = typing({"DR*01:01", "DR*03:01", "DQ*02:01", "DQ*02:01"});
  const auto recipient = typing({"DR*01:01", "DR*01:01", "DQ*01:01", "DQ*01:01"});
  // DR: donor {d0..d5}, recipient {d0..d3} -> 2. DQ: donor {q1..q4}, recipient {q0..q3} -> 1.
  CHECK(eplet_match_score(donor, recipient, reg, LociSet::dr_dq()) == 67 - 3);
  CHECK(eplet_match_score(recipient, recipient, reg, LociSet::dr_dq()) == 67);
  CHECK(eplet_match_score(donor, recipient, reg, LociSet::dr_dq(2)) == 0);  // floored
  CHECK_THROWS_AS(eplet_match_score(donor, recipient, reg, LociSet::b_dr_dq()), EpletsUndefined);
}

TEST_CASE("eplet load matches a per-eplet counter on random registries") {
  Rng rng(11);
  for (int round = 0; round < 40; ++round) {
    EpletRegistry reg;
    std::map<std::string, std::set<int>> carried;  // allele -> eplet numbers
    std::vector<std::string> names;
    for (const char* l : {"A", "B", "C", "DR", "DQ"}) {
      for (int f = 1; f <= 3; ++f) names.push_back(std::string(l) + "*0" + std::to_string(f) + ":01");
    }
    for (const auto& n : names) {
      const Allele a = Allele::parse(n);
      reg.declare(a);
      const EpletGroup g = eplet_group_of(a.locus);
      const int base = g == EpletGroup::ClassI ? 0 : (g == EpletGroup::DR ? 20 : 35);
      const int size = g == EpletGroup::ClassI ? 20 : 15;
      for (int e = 0; e < size; ++e) {
        if (!rng.bernoulli(0.3)) continue;
        reg.add(a, "x" + std::to_string(base + e), g);
        carried[n].insert(base + e);
      }
    }
    auto random_typing = [&] {
      HlaTyping t;
      for (const Locus l : kAllLoci) {
        const std::string p = std::string(locus_name(l)) + "*0";
        t.set(l, Allele::parse(p + std::to_string(1 + rng.index(3)) + ":01"),
              Allele::parse(p + std::to_string(1 + rng.index(3)) + ":01"));
      }
      return t;
    };
    const HlaTyping d = random_typing(), r = random_typing();
    // Independent count: eplet e of the donor is a mismatch unless some
    // recipient allele of the same group carries it.
    auto group_eplets = [&](const HlaTyping& t, EpletGroup g) {
      std::set<int> s;
      for (const Locus l : kAllLoci) {
        if (eplet_group_of(l) != g) continue;
        for (const auto& slot : t.at(l)) {
          const auto& c = carried[slot.to_string()];
          s.insert(c.begin(), c.end());
        }
      }
      return s;
    };
    int load = 0;
    for (const EpletGroup g : kAllEpletGroups) {
      const auto ds = group_eplets(d, g), rs = group_eplets(r, g);
      for (const int e : ds) load += rs.count(e) ? 0 : 1;
    }
    CHECK(eplet_match_score(d, r, reg, LociSet::full(200)) == 200 - load);
  }
}

TEST_CASE("table files parse and report bad rows") {
  std::istringstream map_csv("locus,family,subtype,antigen_family\nB,B15,15:01,B62\nA,A01,01:01,A01\n");
  const auto m = AlleleToAntigenMap::read_csv(map_csv);
  CHECK(m.size() == 2);
  CHECK(m.antigen_of(Allele::parse("B*15:01")) == "B62");

  std::istringstream bad_header("locus,family,subtype\nB,B15,15:01\n");
  CHECK_THROWS_AS(AlleleToAntigenMap::read_csv(bad_header), ParseError);
  std::istringstream bad_locus("locus,family,subtype,antigen_family\nQ,Q1,01:01,Q1\n");
  CHECK_THROWS_AS(AlleleToAntigenMap::read_csv(bad_locus), ParseError);

  std::istringstream reg_csv(
      "locus,family,subtype,eplet_id,class_group\nA,A01,01:01,9Y,I\nA,A01,01:01,44R,I\n"
      "DR,DR01,01:01,,DR\n");
  const auto reg = EpletRegistry::read_csv(reg_csv);
  CHECK(reg.allele_count() == 2);
  CHECK(reg.eplets_of(Allele::parse("A*01:01")).size() == 2);
  CHECK(reg.eplets_of(Allele::parse("DR*01:01")).empty());
  std::istringstream wrong_group("locus,family,subtype,eplet_id,class_group\nA,A01,01:01,9Y,DQ\n");
  CHECK_THROWS_AS(EpletRegistry::read_csv(wrong_group), ParseError);

  CHECK_THROWS_AS(AlleleToAntigenMap::load("/nonexistent/map.csv"), FileError);
}

TEST_CASE("scores stay within their ranges on the shipped tables") {
  HlaTables tables{AlleleToAntigenMap::load(KEP_DATA_DIR "/antigen_map.csv"),
                   EpletRegistry::load(KEP_DATA_DIR "/eplet_registry.csv")};
  std::map<Locus, std::vector<Allele>> alleles;
  {
    std::ifstream in(KEP_DATA_DIR "/antigen_map.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      const auto c1 = line.find(','), c2 = line.find(',', c1 + 1), c3 = line.find(',', c2 + 1);
      const Allele a = Allele::parse(line.substr(0, c1) + "*" + line.substr(c2 + 1, c3 - c2 - 1));
      alleles[a.locus].push_back(a);
    }
  }
  CHECK(tables.eplets.allele_count() == tables.antigen_map.size());
  Rng rng(3);
  auto random_typing = [&] {
    HlaTyping t;
    for (const Locus l : kAllLoci) {
      const auto& v = alleles.at(l);
      t.set(l, v[rng.index(v.size())], v[rng.index(v.size())]);
    }
    return t;
  };
  const auto full = LociSet::full();
  for (int k = 0; k < 300; ++k) {
    const auto d = random_typing(), r = random_typing();
    for (const Paradigm p : kAllParadigms) {
      const int s = paradigm_score(p, d, r, full, tables);
      CHECK(s >= 0);
      CHECK(s <= max_score(p, full));
      CHECK(paradigm_score(p, d, d, full, tables) == max_score(p, full));
    }
  }
}
