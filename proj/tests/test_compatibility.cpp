#include <doctest.h>

#include <algorithm>
#include <set>
#include <tuple>

#include "kep/compatibility.hpp"
#include "kep/error.hpp"
#include "support.hpp"

using namespace kep;
using kep::testing::typing;

namespace {

AlleleToAntigenMap b_map() {
  AlleleToAntigenMap m;
  m.add(Locus::B, "B07", "07:01", "B07");
  m.add(Locus::B, "B07", "07:02", "B07");
  m.add(Locus::B, "B08", "08:01", "B08");
  m.add(Locus::B, "B15", "15:01", "B62");
  return m;
}

std::vector<DsaEntry> dsa(std::initializer_list<const char*> names) {
  std::vector<DsaEntry> out;
  for (const char* n : names) out.push_back({Allele::parse(n)});
  return out;
}

std::set<std::tuple<PairId, PairId>> arc_set(const CompatibilityGraph& g) {
  std::set<std::tuple<PairId, PairId>> out;
  for (const Arc& a : g.arcs()) out.insert({g.node_id(a.from), g.node_id(a.to)});
  return out;
}

}  // namespace

TEST_CASE("ABO rule") {
  using B = BloodType;
  CHECK(abo_compatible(B::O, B::A));
  CHECK_FALSE(abo_compatible(B::A, B::B));
  CHECK(abo_compatible(B::AB, B::AB));
  CHECK(abo_compatible(B::A, B::AB));
  CHECK_FALSE(abo_compatible(B::AB, B::O));
  int count = 0;
  for (B d : {B::O, B::A, B::B, B::AB}) {
    for (B r : {B::O, B::A, B::B, B::AB}) count += abo_compatible(d, r);
  }
  CHECK(count == 9);
  CHECK(parse_blood_type("AB") == B::AB);
  CHECK_FALSE(parse_blood_type("C"));
}

TEST_CASE("DSA rule cases on B07") {
  const auto m = b_map();
  CHECK(dsa_incompatible(dsa({"B*07:01"}), typing({"B07", "B08"}), m));
  CHECK(dsa_incompatible(dsa({"B07"}), typing({"B07", "B08"}), m));
  CHECK(dsa_incompatible(dsa({"B07"}), typing({"B*07:01", "B*08:01"}), m));
  CHECK(dsa_incompatible(dsa({"B*07:01"}), typing({"B*07:01", "B*08:01"}), m));
  CHECK_FALSE(dsa_incompatible(dsa({"B*07:02"}), typing({"B*07:01", "B*08:01"}), m));
}

TEST_CASE("DSA checks use mapped antigens and ignore other loci") {
  const auto m = b_map();
  // B*15:01 belongs to the B62 antigen, not B15.
  CHECK(dsa_incompatible(dsa({"B62"}), typing({"B*15:01", "B*08:01"}), m));
  CHECK_FALSE(dsa_incompatible(dsa({"B15"}), typing({"B*15:01", "B*08:01"}), m));
  CHECK_FALSE(dsa_incompatible(dsa({"A02"}), typing({"B07", "B08"}), m));
  CHECK_FALSE(dsa_incompatible({}, typing({"B07", "B08"}), m));
  // A mapping is only needed when one side is antigen-level.
  CHECK_THROWS_AS(dsa_incompatible(dsa({"B44"}), typing({"B*44:02", "B*08:01"}), m), MissingMapEntry);
  CHECK_FALSE(dsa_incompatible(dsa({"B*44:03"}), typing({"B*44:02", "B*08:01"}), m));
}

TEST_CASE("adding antibodies never restores compatibility") {
  const auto& tables = kep::testing::shipped_tables();
  const auto pool = kep::testing::shipped_pool(60, 21);
  Rng rng(2);
  for (int k = 0; k < 300; ++k) {
    const Pair& a = pool[rng.index(pool.size())];
    const Pair& b = pool[rng.index(pool.size())];
    auto more = b.dsa;
    const Pair& c = pool[rng.index(pool.size())];
    more.insert(more.end(), c.dsa.begin(), c.dsa.end());
    if (dsa_incompatible(b.dsa, a.donor_typing, tables.antigen_map)) {
      CHECK(dsa_incompatible(more, a.donor_typing, tables.antigen_map));
    }
  }
}

TEST_CASE("pair compatibility combines ABO, DSA and the threshold") {
  HlaTables tables{b_map(), {}};
  const LociSet b({Locus::B}, std::nullopt);
  ThresholdConfig cfg{Paradigm::Antigen, b, 1};

  Pair i, j;
  i.donor_typing = typing({"B07", "B08"});
  i.donor_blood = BloodType::O;
  j.recipient_typing = typing({"B07", "B08"});
  j.recipient_blood = BloodType::A;
  CHECK(pair_compatible(i, j, cfg, tables));
  cfg.min_score = 2;
  CHECK(pair_compatible(i, j, cfg, tables));

  j.dsa = dsa({"B07"});
  CHECK_FALSE(pair_compatible(i, j, cfg, tables));
  j.dsa.clear();

  j.recipient_typing = typing({"B07", "B44"});  // score 1
  CHECK_FALSE(pair_compatible(i, j, cfg, tables));
  cfg.min_score = 1;
  CHECK(pair_compatible(i, j, cfg, tables));

  i.donor_blood = BloodType::B;
  CHECK_FALSE(pair_compatible(i, j, cfg, tables));
}

TEST_CASE("default thresholds per loci set") {
  CHECK(ThresholdConfig::defaults(Paradigm::Antigen, LociSet::full()).min_score == 3);
  CHECK(ThresholdConfig::defaults(Paradigm::Allele, LociSet::full()).min_score == 2);
  CHECK(ThresholdConfig::defaults(Paradigm::Eplet, LociSet::full()).min_score == 82);
  CHECK(ThresholdConfig::defaults(Paradigm::Antigen, LociSet::b_dr_dq()).min_score == 2);
  CHECK(ThresholdConfig::defaults(Paradigm::Allele, LociSet::b_dr_dq()).min_score == 1);
  CHECK_THROWS_AS(ThresholdConfig::defaults(Paradigm::Eplet, LociSet::b_dr_dq()), EpletsUndefined);
  CHECK(ThresholdConfig::defaults(Paradigm::Eplet, LociSet::dr_dq()).min_score == 45);
  ThresholdConfig bad{Paradigm::Antigen, LociSet::full(), 11};
  CHECK_THROWS(bad.validate());
}

TEST_CASE("graph on no pairs is empty") {
  const auto g = build_graph({}, ThresholdConfig{}, kep::testing::shipped_tables());
  CHECK(g.node_count() == 0);
  CHECK(g.arc_count() == 0);
}

TEST_CASE("three mutually compatible pairs give six arcs") {
  HlaTables tables{b_map(), {}};
  const LociSet b({Locus::B}, std::nullopt);
  std::vector<Pair> pairs(3);
  for (PairId k = 0; k < 3; ++k) {
    pairs[k].id = k;
    pairs[k].ethnicity = "S";
    pairs[k].recipient_typing = typing({"B07", "B08"});
    pairs[k].donor_typing = typing({"B07", "B08"});
  }
  const auto g = build_graph(pairs, {Paradigm::Antigen, b, 2}, tables);
  CHECK(g.arc_count() == 6);
  CHECK(g.find(0, 1)->scores.antigen == 2);
  CHECK_FALSE(g.find(0, 1)->scores.allele);  // antigen-level data
}

TEST_CASE("graph arcs equal the pairwise check") {
  const auto& tables = kep::testing::shipped_tables();
  for (const std::uint64_t seed : {1, 2, 3}) {
    const auto pool = kep::testing::shipped_pool(20, seed);
    REQUIRE(pool.size() == 20);
    for (const Paradigm p : kAllParadigms) {
      const auto cfg = ThresholdConfig::defaults(p, LociSet::full());
      const auto g = build_graph(pool, cfg, tables);
      std::set<std::tuple<PairId, PairId>> expected;
      for (const Pair& i : pool) {
        for (const Pair& j : pool) {
          if (i.id != j.id && pair_compatible(i, j, cfg, tables)) expected.insert({i.id, j.id});
        }
      }
      CHECK(arc_set(g) == expected);
      for (const Arc& a : g.arcs()) {
        const Pair& i = pool[g.node_id(a.from)];
        const Pair& j = pool[g.node_id(a.to)];
        for (const Paradigm q : kAllParadigms) {
          CHECK(a.scores.get(q) ==
                paradigm_score(q, i.donor_typing, j.recipient_typing, LociSet::full(), tables));
        }
      }
    }
  }
}

TEST_CASE("raising the threshold never adds arcs") {
  const auto& tables = kep::testing::shipped_tables();
  const auto pool = kep::testing::shipped_pool(40, 4);
  std::set<std::tuple<PairId, PairId>> previous;
  for (int t = 10; t >= 0; --t) {
    const auto arcs = arc_set(build_graph(pool, {Paradigm::Antigen, LociSet::full(), t}, tables));
    CHECK(std::includes(arcs.begin(), arcs.end(), previous.begin(), previous.end()));
    previous = arcs;
  }
}

TEST_CASE("graph does not depend on pair order") {
  const auto& tables = kep::testing::shipped_tables();
  auto pool = kep::testing::shipped_pool(40, 5);
  const auto cfg = ThresholdConfig::defaults(Paradigm::Eplet, LociSet::full());
  const auto a = build_graph(pool, cfg, tables);
  Rng rng(8);
  rng.shuffle(pool);
  const auto b = build_graph(pool, cfg, tables);
  CHECK(arc_set(a) == arc_set(b));
  CHECK(a.node_ids() == b.node_ids());
}

TEST_CASE("graph building reports every pair lacking data for the paradigm") {
  const auto& tables = kep::testing::shipped_tables();
  auto pool = kep::testing::shipped_pool(10, 6);
  pool[3].donor_typing.set(Locus::A, Allele::parse("A01"), Allele::parse("A02"));
  pool[7].recipient_typing.set(Locus::DR, Allele::parse("DR01"), Allele::parse("DR03"));
  const auto cfg = ThresholdConfig::defaults(Paradigm::Allele, LociSet::full());
  try {
    build_graph(pool, cfg, tables);
    FAIL("expected an error");
  } catch (const GraphBuildError& e) {
    const std::string what = e.what();
    CHECK(what.find("pair 3") != std::string::npos);
    CHECK(what.find("pair 7") != std::string::npos);
  }
  // The antigen paradigm only needs the mapping, so the same pool works.
  CHECK_NOTHROW(build_graph(pool, ThresholdConfig::defaults(Paradigm::Antigen, LociSet::full()),
                            tables));
}
