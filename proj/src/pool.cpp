// pool.cpp
#include "kep/pool.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

#include "kep/error.hpp"
#include "kep/random.hpp"

namespace kep {

namespace {

void check_distribution(std::span<const double> probs, const std::string& what) {
  double total = 0.0;
  for (const double p : probs) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidDistribution(what + " has a negative entry");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidDistribution(what + " sums to " + std::to_string(total) + ", not 1");
  }
}

std::vector<double> weights_of(const std::vector<std::pair<Allele, double>>& table) {
  std::vector<double> w;
  w.reserve(table.size());
  for (const auto& [a, p] : table) w.push_back(p);
  return w;
}

}  // namespace

void PoolSpec::validate() const {
  if (target_pair_count < 1) throw InvalidDistribution("target_pair_count must be at least 1");
  if (recipient_count < 0 || donor_count < 0) throw InvalidDistribution("negative person counts");
  if (ethnicities.empty()) throw InvalidDistribution("no ethnicities given");
  std::vector<double> probs;
  std::set<std::string> labels;
  for (const auto& e : ethnicities) {
    if (e.label.empty()) throw InvalidDistribution("empty ethnicity label");
    if (!labels.insert(e.label).second) throw InvalidDistribution("duplicate ethnicity " + e.label);
    probs.push_back(e.probability);
    for (const Locus l : loci.loci()) {
      const auto& table = e.alleles[locus_index(l)];
      if (table.empty()) {
        throw InvalidDistribution("ethnicity " + e.label + " has no alleles at locus " +
                                  std::string(locus_name(l)));
      }
      for (const auto& [a, p] : table) {
        if (a.locus != l) {
          throw InvalidDistribution("allele " + a.to_string() + " listed under locus " +
                                    std::string(locus_name(l)));
        }
      }
      check_distribution(weights_of(table),
                         "allele frequencies of " + e.label + " at " + std::string(locus_name(l)));
    }
    if (e.blood_types) check_distribution(*e.blood_types, "blood types of " + e.label);
  }
  check_distribution(probs, "ethnicity distribution");
  check_distribution(blood_types, "blood type distribution");
  if (!(dsa_rate >= 0.0 && dsa_rate <= 1.0)) throw InvalidDistribution("dsa_rate outside [0, 1]");
  if (dsa_candidates < 0) throw InvalidDistribution("dsa_candidates must be non-negative");
  if (!(dsa_antigen_level_fraction >= 0.0 && dsa_antigen_level_fraction <= 1.0)) {
    throw InvalidDistribution("dsa_antigen_level_fraction outside [0, 1]");
  }
}

void ArrivalConfig::validate() const {
  if (!(horizon > 0.0) || !(expected_arrivals > 0.0) || !(departure_hazard > 0.0)) {
    throw PreconditionError("arrival configuration values must all be positive");
  }
}

// ---------------------------------------------------------------------------
// Hopcroft-Karp

std::vector<int> maximum_bipartite_matching(std::size_t right_count,
                                            const std::vector<std::vector<int>>& adjacency) {
  const std::size_t left_count = adjacency.size();
  constexpr int kFree = -1;
  constexpr int kInf = std::numeric_limits<int>::max();
  std::vector<int> match_left(left_count, kFree), match_right(right_count, kFree);
  std::vector<int> dist(left_count);

  auto bfs = [&]() {
    std::queue<int> q;
    bool reachable_free = false;
    for (std::size_t u = 0; u < left_count; ++u) {
      if (match_left[u] == kFree) {
        dist[u] = 0;
        q.push(static_cast<int>(u));
      } else {
        dist[u] = kInf;
      }
    }
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (const int v : adjacency[u]) {
        const int w = match_right[v];
        if (w == kFree) {
          reachable_free = true;
        } else if (dist[w] == kInf) {
          dist[w] = dist[u] + 1;
          q.push(w);
        }
      }
    }
    return reachable_free;
  };

  // Iterative DFS along the BFS layering.
  std::vector<std::size_t> next_edge(left_count);
  auto augment = [&](int root) {
    std::vector<int> stack{root};
    while (!stack.empty()) {
      const int u = stack.back();
      auto& k = next_edge[u];
      bool advanced = false;
      while (k < adjacency[u].size()) {
        const int v = adjacency[u][k++];
        const int w = match_right[v];
        if (w == kFree) {
          // Flip the alternating path held on the stack.
          int right = v;
          for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
            const int left = *it;
            const int previous = match_left[left];
            match_left[left] = right;
            match_right[right] = left;
            right = previous;
          }
          return true;
        }
        if (dist[w] == dist[u] + 1) {
          stack.push_back(w);
          advanced = true;
          break;
        }
      }
      if (!advanced) {
        dist[u] = kInf;
        stack.pop_back();
      }
    }
    return false;
  };

  while (bfs()) {
    std::fill(next_edge.begin(), next_edge.end(), 0);
    for (std::size_t u = 0; u < left_count; ++u) {
      if (match_left[u] == kFree) augment(static_cast<int>(u));
    }
  }
  return match_left;
}

std::vector<Pair> max_cardinality_incompatible_pairing(std::span<const PersonRecord> recipients,
                                                       std::span<const PersonRecord> donors,
                                                       const ThresholdConfig& cfg,
                                                       const HlaTables& tables) {
  std::vector<std::vector<int>> adjacency(recipients.size());
  for (std::size_t r = 0; r < recipients.size(); ++r) {
    const auto& rec = recipients[r];
    for (std::size_t d = 0; d < donors.size(); ++d) {
      const auto& don = donors[d];
      if (!donor_compatible(don.typing, don.blood, rec.typing, rec.blood, rec.dsa, cfg, tables)) {
        adjacency[r].push_back(static_cast<int>(d));
      }
    }
  }
  const auto match = maximum_bipartite_matching(donors.size(), adjacency);

  std::vector<Pair> pairs;
  for (std::size_t r = 0; r < recipients.size(); ++r) {
    if (match[r] < 0) continue;
    const auto& rec = recipients[r];
    const auto& don = donors[static_cast<std::size_t>(match[r])];
    Pair p;
    p.id = static_cast<PairId>(pairs.size());
    p.recipient_typing = rec.typing;
    p.donor_typing = don.typing;
    p.recipient_blood = rec.blood;
    p.donor_blood = don.blood;
    p.ethnicity = rec.ethnicity;
    p.dsa = rec.dsa;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Synthetic population

Population generate_synthetic_population(const PoolSpec& spec,
                                         const AlleleToAntigenMap* antigen_map) {
  spec.validate();
  std::vector<double> ethnic_probs;
  for (const auto& e : spec.ethnicities) ethnic_probs.push_back(e.probability);
  const auto loci = spec.loci.loci();

  auto make_person = [&](Rng& rng, std::uint32_t id, Role role) {
    PersonRecord p;
    p.id = id;
    p.role = role;
    const auto& eth = spec.ethnicities[rng.categorical(ethnic_probs)];
    p.ethnicity = eth.label;
    const auto& blood = eth.blood_types ? *eth.blood_types : spec.blood_types;
    p.blood = static_cast<BloodType>(rng.categorical(blood));
    for (const Locus l : kAllLoci) {
      const auto& table = eth.alleles[locus_index(l)];
      if (table.empty()) continue;
      const auto w = weights_of(table);
      Allele first = table[rng.categorical(w)].first;
      Allele second = table[rng.categorical(w)].first;
      p.typing.set(l, std::move(first), std::move(second));
    }
    return p;
  };

  auto antigen_of = [&](const Allele& a) -> std::string {
    if (a.allele_level() && antigen_map != nullptr && antigen_map->contains(a)) {
      return antigen_map->antigen_of(a);
    }
    return a.family;
  };

  Population pop;
  Rng recipient_rng(derive_seed(spec.seed, 1));
  Rng donor_rng(derive_seed(spec.seed, 2));
  Rng dsa_rng(derive_seed(spec.seed, 3));
  for (int k = 0; k < spec.recipient_count; ++k) {
    pop.recipients.push_back(make_person(recipient_rng, static_cast<std::uint32_t>(k), Role::Recipient));
  }
  for (int k = 0; k < spec.donor_count; ++k) {
    pop.donors.push_back(make_person(donor_rng, static_cast<std::uint32_t>(k), Role::Donor));
  }

  if (spec.dsa_rate > 0.0 && spec.dsa_candidates > 0) {
    for (auto& rec : pop.recipients) {
      for (int c = 0; c < spec.dsa_candidates; ++c) {
        const auto& eth = spec.ethnicities[dsa_rng.categorical(ethnic_probs)];
        const Locus l = loci[dsa_rng.index(loci.size())];
        const auto& table = eth.alleles[locus_index(l)];
        const Allele candidate = table[dsa_rng.categorical(weights_of(table))].first;
        const bool antigen_level = dsa_rng.bernoulli(spec.dsa_antigen_level_fraction);
        if (!dsa_rng.bernoulli(spec.dsa_rate)) continue;
        const auto& own = rec.typing.at(l);
        const auto target = antigen_of(candidate);
        if (antigen_of(own[0]) == target || antigen_of(own[1]) == target) continue;
        DsaEntry entry{antigen_level ? Allele{l, target, std::nullopt} : candidate};
        if (std::find(rec.dsa.begin(), rec.dsa.end(), entry) == rec.dsa.end()) {
          rec.dsa.push_back(std::move(entry));
        }
      }
    }
  }
  return pop;
}

std::vector<Pair> generate_pairs(const PoolSpec& spec, const HlaTables& tables) {
  const Population pop = generate_synthetic_population(spec, &tables.antigen_map);
  const auto cfg = ThresholdConfig::defaults(Paradigm::Antigen, spec.loci);
  auto pairs = max_cardinality_incompatible_pairing(pop.recipients, pop.donors, cfg, tables);
  if (pairs.size() > static_cast<std::size_t>(spec.target_pair_count)) {
    pairs.resize(static_cast<std::size_t>(spec.target_pair_count));
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Times

std::vector<Pair> assign_arrival_departure(std::vector<Pair> pairs, const ArrivalConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  rng.shuffle(pairs);
  const double rate = cfg.expected_arrivals / cfg.horizon;
  double clock = 0.0;
  std::size_t kept = 0;
  for (; kept < pairs.size(); ++kept) {
    clock += rng.exponential(rate);
    if (clock >= cfg.horizon) break;
    Pair& p = pairs[kept];
    p.arrival = clock;
    const double leave = clock + rng.exponential(cfg.departure_hazard);
    p.departure = std::max(leave, std::nextafter(clock, kNever));
  }
  pairs.resize(kept);
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.id < b.id; });
  return pairs;
}

void validate_pool(std::span<const Pair> pairs) {
  std::set<PairId> ids;
  for (const Pair& p : pairs) {
    if (!ids.insert(p.id).second) {
      throw InvariantViolation("pair " + std::to_string(p.id) + ": duplicate id");
    }
    if (!(p.arrival < p.departure)) {
      throw InvariantViolation("pair " + std::to_string(p.id) + ": arrival must precede departure");
    }
    if (p.ethnicity.empty()) {
      throw InvariantViolation("pair " + std::to_string(p.id) + ": empty ethnicity");
    }
  }
}

}  // namespace kep
