// optimizer.cpp
#include "kep/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>

#include "kep/error.hpp"
#include "packing_lp.hpp"

namespace kep {

Cycle Cycle::canonical(std::span<const std::uint32_t> nodes, double weight) {
  if (nodes.size() < 2 || nodes.size() > 3) {
    throw PreconditionError("cycles have length 2 or 3");
  }
  const auto first = std::min_element(nodes.begin(), nodes.end()) - nodes.begin();
  Cycle c;
  c.length = static_cast<std::uint8_t>(nodes.size());
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    c.members[k] = nodes[(static_cast<std::size_t>(first) + k) % nodes.size()];
  }
  c.weight = weight;
  return c;
}

bool key_less(const Cycle& a, const Cycle& b) {
  const auto x = a.nodes();
  const auto y = b.nodes();
  return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
}

bool same_key(const Cycle& a, const Cycle& b) {
  const auto x = a.nodes();
  const auto y = b.nodes();
  return std::equal(x.begin(), x.end(), y.begin(), y.end());
}

ObjectiveConfig ObjectiveConfig::for_threshold(const ThresholdConfig& cfg, double m) {
  ObjectiveConfig out;
  out.paradigm = cfg.paradigm;
  out.z = max_score(cfg.paradigm, cfg.loci);
  out.m = m;
  return out;
}

double ObjectiveConfig::weight_of(const std::string& label) const {
  if (equity_weights.empty()) return 1.0;
  const auto it = equity_weights.find(label);
  if (it == equity_weights.end()) throw MissingWeight("no equity weight for subpopulation " + label);
  return it->second;
}

void ObjectiveConfig::validate() const {
  if (z <= 0) throw PreconditionError("Z must be positive");
  if (!(m >= 1.0)) throw PreconditionError("m must be at least 1");
  for (const auto& [label, v] : equity_weights) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw PreconditionError("equity weight of " + label + " must be positive");
    }
  }
}

std::size_t Solution::transplants() const {
  std::size_t n = 0;
  for (const auto& c : cycles) n += c.length;
  return n;
}

// ---------------------------------------------------------------------------
// Cycles

std::vector<Cycle> enumerate_cycles(const CompatibilityGraph& graph,
                                    std::span<const std::uint32_t> active, int max_len) {
  if (max_len != 2 && max_len != 3) throw PreconditionError("max cycle length must be 2 or 3");
  std::vector<char> is_active(graph.node_count(), 0);
  for (const auto v : active) {
    if (v >= graph.node_count()) throw PreconditionError("active node out of range");
    is_active[v] = 1;
  }
  std::vector<std::uint32_t> order(active.begin(), active.end());
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());

  std::vector<Cycle> out;
  for (const auto u : order) {
    for (const Arc& uv : graph.out_arcs(u)) {
      const auto v = uv.to;
      if (v <= u || !is_active[v]) continue;
      if (graph.has_arc(v, u)) out.push_back(Cycle{{u, v, 0}, 2, 0.0});
      if (max_len < 3) continue;
      for (const Arc& vw : graph.out_arcs(v)) {
        const auto w = vw.to;
        if (w <= u || w == v || !is_active[w]) continue;
        if (graph.has_arc(w, u)) out.push_back(Cycle{{u, v, w}, 3, 0.0});
      }
    }
  }
  std::sort(out.begin(), out.end(), key_less);
  return out;
}

namespace {

int arc_score(const CompatibilityGraph& graph, std::uint32_t from, std::uint32_t to,
              Paradigm paradigm) {
  const Arc* arc = graph.find(from, to);
  if (arc == nullptr) {
    throw PreconditionError("cycle uses missing arc " + std::to_string(graph.node_id(from)) +
                            " -> " + std::to_string(graph.node_id(to)));
  }
  const auto score = arc->scores.get(paradigm);
  if (!score) {
    if (paradigm == Paradigm::Eplet && !graph.config().loci.supports_eplets()) {
      throw EpletsUndefined("eplet scores are not defined for loci set " +
                            graph.config().loci.name());
    }
    throw PreconditionError("arc " + std::to_string(graph.node_id(from)) + " -> " +
                            std::to_string(graph.node_id(to)) + " has no " +
                            std::string(paradigm_name(paradigm)) + " score");
  }
  return *score;
}

}  // namespace

double cycle_hla(const Cycle& cycle, const CompatibilityGraph& graph, const ObjectiveConfig& cfg) {
  double total = 0.0;
  const auto nodes = cycle.nodes();
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto next = nodes[(k + 1) % nodes.size()];
    total += static_cast<double>(arc_score(graph, nodes[k], next, cfg.paradigm)) / cfg.z;
  }
  return total;
}

double cycle_weight(const Cycle& cycle, const CompatibilityGraph& graph, const ObjectiveConfig& cfg) {
  double total = 0.0;
  const auto nodes = cycle.nodes();
  const double scale = cfg.m * cfg.z;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const auto next = nodes[(k + 1) % nodes.size()];
    const double score = arc_score(graph, nodes[k], next, cfg.paradigm);
    total += cfg.weight_of(graph.node_label(next)) * (1.0 + score / scale);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Exact packing

namespace {

thread_local PackingStats g_stats;

bool lex_less(const std::vector<Cycle>& a, const std::vector<Cycle>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), key_less);
}

void sort_and_check(std::vector<Cycle>& cycles) {
  for (const auto& c : cycles) {
    if (c.length < 2 || c.length > 3) throw PreconditionError("cycles have length 2 or 3");
    if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
      throw PreconditionError("cycle weights must be positive and finite");
    }
    const auto n = c.nodes();
    if (*std::min_element(n.begin(), n.end()) != n[0]) {
      throw PreconditionError("cycle not in canonical rotation");
    }
    if (n[0] == n[1] || (c.length == 3 && (n[1] == n[2] || n[0] == n[2]))) {
      throw PreconditionError("cycle repeats a node");
    }
  }
  std::sort(cycles.begin(), cycles.end(), key_less);
  for (std::size_t k = 1; k < cycles.size(); ++k) {
    if (same_key(cycles[k - 1], cycles[k])) throw PreconditionError("duplicate cycle");
  }
}

// Two passes. The first finds the optimal value by LP branch and bound. The
// second is a depth-first search that branches on the smallest undecided
// vertex: first on each cycle through it (in key order), then on leaving it
// unmatched. It visits packings in lexicographic order of their sorted key
// lists, so the first packing reaching the optimal value is the answer.
// LP duals bound every branch.
class ComponentSearch {
 public:
  ComponentSearch(std::size_t vertex_count, std::vector<Cycle> cycles)
      : vertex_count_(vertex_count), cycles_(std::move(cycles)), through_(vertex_count),
        blocked_(cycles_.size(), 0), removed_(vertex_count, 0), lp_(make_lp()) {
    for (std::size_t c = 0; c < cycles_.size(); ++c) {
      for (const auto v : cycles_[c].nodes()) through_[v].push_back(c);
    }
  }

  std::vector<std::size_t> run() {
    Relaxation root = solve_relaxation();
    eps_ = 1e-9 * std::max(1.0, root.bound);
    greedy_from(root);
    maximize(0.0, &root);
    search(0, 0.0, root);
    return best_;
  }

 private:
  struct Relaxation {
    double bound = 0.0;
    std::vector<double> dual;    // per vertex, feasible
    std::vector<double> primal;  // per cycle
    bool converged = false;
  };

  detail::PackingLp make_lp() const {
    detail::PackingLp lp;
    lp.rows = vertex_count_;
    for (const auto& c : cycles_) lp.add_column(c.members.data(), c.length, c.weight);
    return lp;
  }

  bool available(std::size_t c) const { return blocked_[c] == 0; }

  // Parent bases are restored after each child so children start from a
  // dual feasible basis. Inverses are kept while they fit in the budget.
  detail::PackingSimplex::State checkpoint() {
    constexpr std::size_t kBudgetBytes = std::size_t{256} << 20;
    const std::size_t bytes = vertex_count_ * vertex_count_ * sizeof(double);
    return lp_.save(++saved_ * bytes <= kBudgetBytes);
  }

  void block(std::size_t c) {
    if (blocked_[c]++ == 0) lp_.set_enabled(c, false);
  }
  void unblock(std::size_t c) {
    if (--blocked_[c] == 0) lp_.set_enabled(c, true);
  }
  void remove_vertex(std::uint32_t v) {
    removed_[v] = 1;
    for (const auto c : through_[v]) block(c);
  }
  void restore_vertex(std::uint32_t v) {
    removed_[v] = 0;
    for (const auto c : through_[v]) unblock(c);
  }

  Relaxation solve_relaxation() {
    ++g_stats.lp_solves;
    auto sol = lp_.solve();
    g_stats.lp_iterations += sol.iterations;
    return Relaxation{sol.bound, std::move(sol.dual), std::move(sol.primal), sol.converged};
  }

  bool integral(const Relaxation& rel) const {
    if (!rel.converged) return false;
    for (std::size_t c = 0; c < cycles_.size(); ++c) {
      if (!available(c)) continue;
      const double x = rel.primal[c];
      if (x > 1e-9 && x < 1.0 - 1e-9) return false;
    }
    return true;
  }

  // Greedy packing in order of LP value; only raises the achievable target.
  void greedy_from(const Relaxation& rel, double value = 0.0) {
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < cycles_.size(); ++c) {
      if (available(c)) order.push_back(c);
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (rel.primal[a] != rel.primal[b]) return rel.primal[a] > rel.primal[b];
      return cycles_[a].weight > cycles_[b].weight;
    });
    std::vector<char> used(vertex_count_, 0);
    for (const auto c : order) {
      const auto nodes = cycles_[c].nodes();
      if (std::any_of(nodes.begin(), nodes.end(), [&](auto v) { return used[v] || removed_[v]; }))
        continue;
      for (const auto v : nodes) used[v] = 1;
      value += cycles_[c].weight;
    }
    achievable_ = std::max(achievable_, value);
  }

  // Branch and bound for the optimal value only; it becomes the target of
  // the ordered search.
  void maximize(double value, const Relaxation* given = nullptr) {
    ++g_stats.value_nodes;
    Relaxation fresh;
    if (given == nullptr) fresh = solve_relaxation();
    const Relaxation& rel = given ? *given : fresh;
    if (value + rel.bound <= achievable_ + eps_) return;
    if (integral(rel)) {
      double x = 0.0;
      for (std::size_t c = 0; c < cycles_.size(); ++c) {
        if (available(c) && rel.primal[c] > 0.5) x += cycles_[c].weight;
      }
      achievable_ = std::max(achievable_, value + x);
      return;
    }
    greedy_from(rel, value);
    // Branch on the vertex whose cycles are most evenly split.
    std::uint32_t pick = UINT32_MAX;
    double pick_score = 2.0;
    for (std::uint32_t v = 0; v < vertex_count_; ++v) {
      if (removed_[v]) continue;
      double top = 0.0;
      double sum = 0.0;
      for (const auto c : through_[v]) {
        if (!available(c)) continue;
        top = std::max(top, rel.primal[c]);
        sum += rel.primal[c];
      }
      if (top <= 1e-9 || top >= 1.0 - 1e-9) continue;
      const double score = top - (sum - top);
      if (score < pick_score) {
        pick_score = score;
        pick = v;
      }
    }
    if (pick == UINT32_MAX) {
      for (std::uint32_t v = 0; v < vertex_count_ && pick == UINT32_MAX; ++v) {
        if (!removed_[v] && std::any_of(through_[v].begin(), through_[v].end(),
                                        [&](std::size_t c) { return available(c); })) {
          pick = v;
        }
      }
      if (pick == UINT32_MAX) return;
    }
    std::vector<std::size_t> options;
    for (const auto c : through_[pick]) {
      if (available(c)) options.push_back(c);
    }
    std::stable_sort(options.begin(), options.end(),
                     [&](std::size_t a, std::size_t b) { return rel.primal[a] > rel.primal[b]; });
    const std::vector<double> dual = rel.dual;
    const double bound = value + rel.bound;
    const auto state = checkpoint();
    for (const auto c : options) {
      double covered = 0.0;
      for (const auto u : cycles_[c].nodes()) covered += dual[u];
      if (bound - covered + cycles_[c].weight <= achievable_ + eps_) continue;
      for (const auto u : cycles_[c].nodes()) remove_vertex(u);
      maximize(value + cycles_[c].weight);
      for (const auto u : cycles_[c].nodes()) restore_vertex(u);
      lp_.restore(state);
    }
    if (bound - dual[pick] > achievable_ + eps_) {
      remove_vertex(pick);
      maximize(value);
      restore_vertex(pick);
      lp_.restore(state);
    }
    --saved_;
  }

  bool prune(double bound) const { return found_ || bound < achievable_ - eps_; }

  void search(std::uint32_t cursor, double value, const Relaxation& inherited, bool exact = true) {
    ++g_stats.nodes;
    std::uint32_t v = cursor;
    while (v < vertex_count_ &&
           (removed_[v] ||
            std::none_of(through_[v].begin(), through_[v].end(),
                         [&](std::size_t c) { return available(c); }))) {
      ++v;
    }
    if (v == vertex_count_) {
      if (value >= achievable_ - eps_) {
        found_ = true;
        best_ = chosen_;
      }
      return;
    }

    Relaxation fresh;
    std::optional<detail::PackingSimplex::State> state;
    const Relaxation* rel = &inherited;
    if (!exact) {
      double cheap = 0.0;
      for (std::uint32_t u = v; u < vertex_count_; ++u) {
        if (removed_[u]) continue;
        double share = 0.0;
        for (const auto c : through_[u]) {
          if (available(c)) share = std::max(share, cycles_[c].weight / cycles_[c].length);
        }
        cheap += share;
      }
      if (prune(value + cheap)) return;
      fresh = solve_relaxation();
      rel = &fresh;
      state = checkpoint();
    }
    double bound = 0.0;
    for (std::uint32_t u = v; u < vertex_count_; ++u) {
      if (!removed_[u]) bound += rel->dual[u];
    }
    if (!prune(value + bound)) branch_vertex(v, value, bound, *rel, state);
    if (state) --saved_;
  }

  void branch_vertex(std::uint32_t v, double value, double bound, const Relaxation& parent,
                     const std::optional<detail::PackingSimplex::State>& state) {
    const Relaxation* rel = &parent;

    for (const auto c : through_[v]) {
      if (!available(c)) continue;
      const Cycle& cyc = cycles_[c];
      double covered = 0.0;
      for (const auto u : cyc.nodes()) covered += rel->dual[u];
      if (prune(value + bound - covered + cyc.weight)) continue;
      for (const auto u : cyc.nodes()) remove_vertex(u);
      chosen_.push_back(c);
      search(v + 1, value + cyc.weight, *rel, rel->converged && rel->primal[c] >= 1.0 - 1e-9);
      chosen_.pop_back();
      for (const auto u : cyc.nodes()) restore_vertex(u);
      if (state) lp_.restore(*state);
    }

    double through_v = 0.0;
    for (const auto c : through_[v]) {
      if (available(c)) through_v += rel->primal[c];
    }
    if (!prune(value + bound - rel->dual[v])) {
      remove_vertex(v);
      search(v + 1, value, *rel, rel->converged && through_v <= 1e-9);
      restore_vertex(v);
      if (state) lp_.restore(*state);
    }
  }

  std::size_t vertex_count_;
  std::vector<Cycle> cycles_;
  std::vector<std::vector<std::size_t>> through_;
  std::vector<int> blocked_;
  std::vector<char> removed_;

  double eps_ = 1e-9;
  double achievable_ = -std::numeric_limits<double>::infinity();
  bool found_ = false;
  std::size_t saved_ = 0;
  std::vector<std::size_t> chosen_;
  std::vector<std::size_t> best_;
  detail::PackingSimplex lp_;
};

}  // namespace

Solution solve_packing(std::vector<Cycle> cycles) {
  g_stats = PackingStats{};
  sort_and_check(cycles);

  // Compact node numbering that preserves order.
  std::vector<std::uint32_t> nodes;
  for (const auto& c : cycles) {
    for (const auto v : c.nodes()) nodes.push_back(v);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  auto local = [&](std::uint32_t v) {
    return static_cast<std::uint32_t>(std::lower_bound(nodes.begin(), nodes.end(), v) - nodes.begin());
  };

  std::vector<std::uint32_t> parent(nodes.size());
  std::iota(parent.begin(), parent.end(), 0U);
  std::function<std::uint32_t(std::uint32_t)> find = [&](std::uint32_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& c : cycles) {
    const auto n = c.nodes();
    for (std::size_t k = 1; k < n.size(); ++k) {
      const auto a = find(local(n[0]));
      const auto b = find(local(n[k]));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }

  // Group cycles by component, renumbering vertices inside each component.
  std::vector<std::vector<std::size_t>> members_of(nodes.size());
  for (std::size_t c = 0; c < cycles.size(); ++c) members_of[find(local(cycles[c].members[0]))].push_back(c);

  Solution out;
  for (std::uint32_t root = 0; root < nodes.size(); ++root) {
    const auto& group = members_of[root];
    if (group.empty()) continue;
    ++g_stats.components;
    std::vector<std::uint32_t> verts;
    for (const auto c : group) {
      for (const auto v : cycles[c].nodes()) verts.push_back(v);
    }
    std::sort(verts.begin(), verts.end());
    verts.erase(std::unique(verts.begin(), verts.end()), verts.end());
    std::vector<Cycle> sub;
    sub.reserve(group.size());
    for (const auto c : group) {
      Cycle s = cycles[c];
      for (std::size_t k = 0; k < s.length; ++k) {
        s.members[k] = static_cast<std::uint32_t>(
            std::lower_bound(verts.begin(), verts.end(), s.members[k]) - verts.begin());
      }
      sub.push_back(s);
    }
    ComponentSearch search(verts.size(), std::move(sub));
    for (const auto k : search.run()) out.cycles.push_back(cycles[group[k]]);
  }
  std::sort(out.cycles.begin(), out.cycles.end(), key_less);
  for (const auto& c : out.cycles) out.objective += c.weight;
  return out;
}

Solution solve_instant_kep(const Instance& instance) {
  if (instance.graph == nullptr) throw PreconditionError("instance has no graph");
  instance.objective.validate();
  auto cycles = enumerate_cycles(*instance.graph, instance.active, instance.max_cycle_length);
  for (auto& c : cycles) c.weight = cycle_weight(c, *instance.graph, instance.objective);
  return solve_packing(std::move(cycles));
}

Solution brute_force_packing(std::vector<Cycle> cycles) {
  sort_and_check(cycles);
  std::vector<std::uint32_t> nodes;
  for (const auto& c : cycles) {
    for (const auto v : c.nodes()) nodes.push_back(v);
  }
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());
  if (nodes.size() > kBruteForceMaxNodes) {
    throw TooLarge("brute force packing limited to " + std::to_string(kBruteForceMaxNodes) +
                   " nodes, got " + std::to_string(nodes.size()));
  }
  std::vector<std::uint32_t> masks;
  double total = 0.0;
  for (const auto& c : cycles) {
    std::uint32_t mask = 0;
    for (const auto v : c.nodes()) {
      mask |= 1U << (std::lower_bound(nodes.begin(), nodes.end(), v) - nodes.begin());
    }
    masks.push_back(mask);
    total += c.weight;
  }
  const double eps = 1e-9 * std::max(1.0, total);

  // Each independent subset is generated exactly once (increasing indices).
  std::vector<Cycle> current, best;
  double best_value = 0.0;
  std::function<void(std::size_t, std::uint32_t, double)> visit = [&](std::size_t start,
                                                                      std::uint32_t used,
                                                                      double value) {
    if (value > best_value + eps ||
        (value >= best_value - eps && lex_less(current, best))) {
      best_value = value;
      best = current;
    }
    for (std::size_t k = start; k < cycles.size(); ++k) {
      if (masks[k] & used) continue;
      current.push_back(cycles[k]);
      visit(k + 1, used | masks[k], value + cycles[k].weight);
      current.pop_back();
    }
  };
  visit(0, 0, 0.0);

  Solution out;
  out.cycles = std::move(best);
  for (const auto& c : out.cycles) out.objective += c.weight;
  return out;
}

const PackingStats& last_packing_stats() { return g_stats; }

}  // namespace kep
