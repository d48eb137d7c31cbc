#include "doctest.h"

#include <chrono>

#include "kep/error.hpp"
#include "kep/optimizer.hpp"
#include "support.hpp"

using namespace kep;
using kep::testing::all_nodes;
using kep::testing::random_graph;

TEST_CASE("canonical rotation puts the smallest node first") {
  const std::vector<std::uint32_t> nodes{7, 2, 5};
  const auto c = Cycle::canonical(nodes, 1.5);
  CHECK(c.length == 3);
  CHECK(c.members[0] == 2);
  CHECK(c.members[1] == 5);
  CHECK(c.members[2] == 7);
  CHECK_THROWS_AS(Cycle::canonical(std::vector<std::uint32_t>{1}), PreconditionError);
}

TEST_CASE("key order puts a 2-cycle before its 3-cycle extension") {
  const Cycle a{{0, 1, 0}, 2, 1.0};
  const Cycle b{{0, 1, 2}, 3, 1.0};
  CHECK(key_less(a, b));
  CHECK_FALSE(key_less(b, a));
}

TEST_CASE("enumerated cycles match path extension") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const auto n = 2 + rng.index(8);
    const auto g = random_graph(rng, n, 0.2 + 0.6 * rng.uniform());
    for (int len : {2, 3}) {
      const auto cycles = enumerate_cycles(g, all_nodes(g), len);
      std::set<std::vector<std::uint32_t>> got;
      for (const auto& c : cycles) got.emplace(c.nodes().begin(), c.nodes().end());
      CHECK(got.size() == cycles.size());
      CHECK(got == kep::testing::naive_cycles(g, len));
    }
  }
}

TEST_CASE("enumeration respects the active set") {
  Rng rng(5);
  const auto g = random_graph(rng, 9, 0.7);
  const std::vector<std::uint32_t> active{1, 3, 4, 8};
  for (const auto& c : enumerate_cycles(g, active, 3)) {
    for (const auto v : c.nodes()) CHECK(std::find(active.begin(), active.end(), v) != active.end());
  }
}

TEST_CASE("cycle weight with unit weights is length plus HLA over m") {
  Rng rng(3);
  const auto g = random_graph(rng, 6, 0.9);
  ObjectiveConfig obj;
  obj.z = 10;
  obj.m = 50;
  for (const auto& c : enumerate_cycles(g, all_nodes(g), 3)) {
    const double hla = cycle_hla(c, g, obj);
    CHECK(cycle_weight(c, g, obj) == doctest::Approx(c.length + hla / obj.m).epsilon(1e-12));
  }
}

TEST_CASE("equity weight is charged to the receiving recipient") {
  std::vector<Arc> arcs{{0, 1, {}}, {1, 0, {}}};
  arcs[0].scores.antigen = 10;
  arcs[1].scores.antigen = 0;
  const CompatibilityGraph g(ThresholdConfig{}, {0, 1}, {"X", "Y"}, arcs);
  ObjectiveConfig obj;
  obj.m = 10;
  obj.equity_weights = {{"X", 2.0}, {"Y", 3.0}};
  const Cycle c{{0, 1, 0}, 2, 0.0};
  // 0 -> 1 lands on Y with score 10; 1 -> 0 lands on X with score 0.
  CHECK(cycle_weight(c, g, obj) == doctest::Approx(3.0 * (1 + 10.0 / 100) + 2.0 * 1.0));
  obj.equity_weights = {{"X", 2.0}};
  CHECK_THROWS_AS(cycle_weight(c, g, obj), MissingWeight);
}

TEST_CASE("packing agrees with exhaustive search, including ties") {
  Rng rng(2024);
  for (int trial = 0; trial < 300; ++trial) {
    const auto n = 2 + rng.index(11);
    const auto g = random_graph(rng, n, 0.2 + 0.6 * rng.uniform());
    auto cycles = enumerate_cycles(g, all_nodes(g), 3);
    const bool integer_weights = trial % 2 == 0;
    for (auto& c : cycles) c.weight = integer_weights ? 1.0 + static_cast<double>(rng.index(3)) : 0.1 + rng.uniform();
    const auto fast = solve_packing(cycles);
    const auto slow = brute_force_packing(cycles);
    CHECK(fast.objective == doctest::Approx(slow.objective).epsilon(1e-12));
    REQUIRE(fast.cycles.size() == slow.cycles.size());
    for (std::size_t k = 0; k < fast.cycles.size(); ++k) CHECK(same_key(fast.cycles[k], slow.cycles[k]));
  }
}

TEST_CASE("exhaustive search refuses large instances") {
  std::vector<Cycle> cycles;
  for (std::uint32_t k = 0; k < 9; ++k) cycles.push_back(Cycle{{2 * k, 2 * k + 1, 0}, 2, 1.0});
  CHECK_THROWS_AS(brute_force_packing(cycles), TooLarge);
  CHECK(solve_packing(cycles).transplants() == 18);
}

TEST_CASE("packing rejects malformed cycles") {
  CHECK_THROWS_AS(solve_packing({Cycle{{1, 0, 0}, 2, 1.0}}), PreconditionError);
  CHECK_THROWS_AS(solve_packing({Cycle{{0, 1, 0}, 2, 0.0}}), PreconditionError);
  CHECK_THROWS_AS(solve_packing({Cycle{{0, 1, 0}, 2, 1.0}, Cycle{{0, 1, 0}, 2, 2.0}}), PreconditionError);
  CHECK(solve_packing({}).cycles.empty());
}

TEST_CASE("large sparse instance solves quickly") {
  Rng rng(99);
  const auto g = random_graph(rng, 150, 0.05);
  ObjectiveConfig obj;
  obj.m = 300;
  Instance inst{&g, all_nodes(g), obj, 3};
  const auto start = std::chrono::steady_clock::now();
  const auto sol = solve_instant_kep(inst);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  MESSAGE("150 nodes: ", sol.transplants(), " transplants, ", last_packing_stats().nodes,
          " search nodes, ", last_packing_stats().lp_solves, " LPs, ", secs, " s");
  CHECK(sol.transplants() > 0);
  CHECK(secs < 30.0);
}
