#include <doctest.h>

#include <cmath>
#include <functional>

#include "kep/error.hpp"
#include "kep/io.hpp"
#include "kep/pool.hpp"
#include "support.hpp"

using namespace kep;

namespace {

// Maximum matching size by trying every assignment.
int brute_force_matching(std::size_t right, const std::vector<std::vector<int>>& adj) {
  std::vector<bool> used(right, false);
  std::function<int(std::size_t)> go = [&](std::size_t l) -> int {
    if (l == adj.size()) return 0;
    int best = go(l + 1);
    for (const int r : adj[l]) {
      if (used[r]) continue;
      used[r] = true;
      best = std::max(best, 1 + go(l + 1));
      used[r] = false;
    }
    return best;
  };
  return go(0);
}

}  // namespace

TEST_CASE("Hopcroft-Karp matches brute force on small graphs") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t left = 1 + rng.index(8), right = 1 + rng.index(8);
    const double density = rng.uniform();
    std::vector<std::vector<int>> adj(left);
    for (auto& row : adj) {
      for (std::size_t r = 0; r < right; ++r) {
        if (rng.bernoulli(density)) row.push_back(static_cast<int>(r));
      }
    }
    const auto match = maximum_bipartite_matching(right, adj);
    REQUIRE(match.size() == left);
    int size = 0;
    std::vector<int> seen(right, 0);
    for (std::size_t l = 0; l < left; ++l) {
      if (match[l] < 0) continue;
      ++size;
      CHECK(std::find(adj[l].begin(), adj[l].end(), match[l]) != adj[l].end());
      CHECK(++seen[match[l]] == 1);
    }
    CHECK(size == brute_force_matching(right, adj));
  }
}

TEST_CASE("pairing needs direct incompatibility") {
  const auto& tables = kep::testing::shipped_tables();
  const auto cfg = ThresholdConfig::defaults(Paradigm::Antigen, LociSet::full());
  std::vector<PersonRecord> rs(3), ds(3);
  for (int k = 0; k < 3; ++k) {
    rs[k].id = k;
    rs[k].role = Role::Recipient;
    rs[k].typing = kep::testing::typing({"A01", "A02", "B07", "B08", "C01", "C02", "DR01",
                                         "DR03", "DQ02", "DQ05"});
    rs[k].blood = BloodType::AB;
    rs[k].ethnicity = "X";
    ds[k] = rs[k];
    ds[k].role = Role::Donor;
    ds[k].blood = BloodType::O;
  }
  // Every donor can give to every recipient.
  CHECK(max_cardinality_incompatible_pairing(rs, ds, cfg, tables).empty());

  // Only donor 2 is blocked for recipient 1.
  ds[2].blood = BloodType::B;
  rs[1].blood = BloodType::A;
  const auto pairs = max_cardinality_incompatible_pairing(rs, ds, cfg, tables);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].id == 0);
  CHECK(pairs[0].donor_blood == BloodType::B);
  CHECK(pairs[0].recipient_blood == BloodType::A);
}

TEST_CASE("generated pairs are internally incompatible and reproducible") {
  const auto& tables = kep::testing::shipped_tables();
  const auto spec = kep::testing::shipped_spec(120, 9);
  const auto pairs = generate_pairs(spec, tables);
  CHECK(pairs.size() == 120);
  const auto cfg = ThresholdConfig::defaults(Paradigm::Antigen, LociSet::full());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    CHECK(pairs[k].id == k);
    CHECK_FALSE(pair_compatible(pairs[k], pairs[k], cfg, tables));
    CHECK(pairs[k].departure == kNever);
  }
  CHECK(generate_pairs(spec, tables) == pairs);
  auto other = spec;
  other.seed = 10;
  CHECK(generate_pairs(other, tables) != pairs);
}

TEST_CASE("ethnicity frequencies follow the spec") {
  PoolSpec spec = kep::testing::shipped_spec(10, 3);
  spec.ethnicities.resize(2);
  spec.ethnicities[0].probability = 0.7;
  spec.ethnicities[1].probability = 0.3;
  spec.recipient_count = 6000;
  spec.donor_count = 10;
  const auto pop = generate_synthetic_population(spec, &kep::testing::shipped_tables().antigen_map);
  REQUIRE(pop.recipients.size() == 6000);
  double first = 0;
  for (const auto& r : pop.recipients) first += r.ethnicity == spec.ethnicities[0].label;
  const double sigma = std::sqrt(6000 * 0.7 * 0.3);
  CHECK(std::abs(first - 4200) < 3 * sigma);
  for (const auto& r : pop.recipients) {
    // A recipient never carries antibodies against its own typing.
    CHECK_FALSE(dsa_incompatible(r.dsa, r.typing, kep::testing::shipped_tables().antigen_map));
  }
}

TEST_CASE("arrival process") {
  std::vector<Pair> pairs(20000);
  for (std::size_t k = 0; k < pairs.size(); ++k) pairs[k].id = k;
  ArrivalConfig cfg;
  cfg.seed = 5;
  cfg.expected_arrivals = 990;
  const auto timed = assign_arrival_departure(pairs, cfg);
  // Arrivals stop at the horizon.
  CHECK(std::abs(static_cast<double>(timed.size()) - 990) < 4 * std::sqrt(990.0));
  double sojourn = 0;
  for (const auto& p : timed) {
    CHECK(p.arrival < cfg.horizon);
    CHECK(p.departure > p.arrival);
    sojourn += p.departure - p.arrival;
  }
  CHECK(std::is_sorted(timed.begin(), timed.end(),
                       [](const Pair& a, const Pair& b) { return a.id < b.id; }));
  sojourn /= timed.size();
  CHECK(std::abs(sojourn - 365 / 0.29) < 0.1 * 365 / 0.29);

  // Inter-arrival gaps over a long horizon.
  cfg.horizon = 3650.0 * 11;
  cfg.expected_arrivals = 990.0 * 11;
  const auto many = assign_arrival_departure(pairs, cfg);
  std::vector<double> times;
  for (const auto& p : many) times.push_back(p.arrival);
  std::sort(times.begin(), times.end());
  REQUIRE(times.size() > 10000);
  const double mean_gap = times.back() / times.size();
  CHECK(std::abs(mean_gap - 3650.0 / 990) < 0.05 * 3650.0 / 990);

  CHECK(assign_arrival_departure(pairs, cfg) == many);
  cfg.seed = 6;
  CHECK(assign_arrival_departure(pairs, cfg) != many);
}

TEST_CASE("infinite hazard leaves no sojourn") {
  std::vector<Pair> pairs(50);
  for (std::size_t k = 0; k < pairs.size(); ++k) pairs[k].id = k;
  ArrivalConfig cfg;
  cfg.departure_hazard = std::numeric_limits<double>::infinity();
  for (const auto& p : assign_arrival_departure(pairs, cfg)) {
    CHECK(p.departure == std::nextafter(p.arrival, kNever));
  }
}

TEST_CASE("pool validation") {
  auto pool = kep::testing::shipped_pool(5, 2);
  CHECK_NOTHROW(validate_pool(pool));
  pool[1].arrival = 10;
  pool[1].departure = 10;
  CHECK_THROWS_AS(validate_pool(pool), InvariantViolation);
  pool[1].departure = 11;
  pool[2].id = pool[3].id;
  CHECK_THROWS_AS(validate_pool(pool), InvariantViolation);
  CHECK_NOTHROW(validate_pool(std::vector<Pair>{}));
}

TEST_CASE("pool JSON round trip") {
  ArrivalConfig cfg;
  cfg.expected_arrivals = 40;
  auto pool = assign_arrival_departure(kep::testing::shipped_pool(30, 12), cfg);
  pool.back().departure = kNever;
  const auto back = io::pool_from_json(io::pool_to_json(pool));
  CHECK(back == pool);
  CHECK(io::pool_from_json(io::Json::array()).empty());

  auto bad = io::pool_to_json(pool);
  bad[0]["departure"] = bad[0]["arrival"];
  CHECK_THROWS_AS(io::pool_from_json(bad), InvariantViolation);
}

TEST_CASE("invalid specs are rejected") {
  auto spec = kep::testing::shipped_spec(10, 1);
  spec.ethnicities[0].probability = -1;
  CHECK_THROWS(spec.validate());
  ArrivalConfig cfg;
  cfg.horizon = 0;
  CHECK_THROWS(cfg.validate());
}
