// packing_lp.cpp
// Revised primal simplex with an explicit dense basis inverse. The row count
// is the number of pairs in one component of one time instant, so the
// inverse stays small; columns (cycles) are only touched through sparse
// pricing. Disabling a column fixes it at zero: a dual simplex phase pushes
// disabled basic columns out when the basis is dual feasible, and the primal
// phase falls back to a large negative cost (big-M) otherwise.
#include "packing_lp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace kep::detail {

namespace {

constexpr double kPriceTol = 1e-9;
constexpr double kPivotTol = 1e-9;
constexpr std::size_t kRefactorEvery = 64;
constexpr std::size_t kDegenerateLimit = 30;

Eigen::Index ix(std::size_t k) { return static_cast<Eigen::Index>(k); }

}  // namespace

void PackingLp::add_column(const std::uint32_t* rows_begin, std::uint8_t length, double c) {
  std::array<std::uint32_t, 3> r{};
  std::copy(rows_begin, rows_begin + length, r.begin());
  column_rows.push_back(r);
  column_length.push_back(length);
  cost.push_back(c);
}

PackingSimplex::PackingSimplex(PackingLp lp)
    : lp_(std::move(lp)), m_(lp_.rows), n_(lp_.columns()), enabled_(n_, 1), basis_(m_),
      position_(n_ + m_, -1) {
  double total = 1.0;
  for (const double c : lp_.cost) total += std::abs(c);
  big_m_ = 1e3 * total;
  for (std::size_t i = 0; i < m_; ++i) {
    basis_[i] = n_ + i;
    position_[n_ + i] = static_cast<std::ptrdiff_t>(i);
  }
  binv_ = Eigen::MatrixXd::Identity(ix(m_), ix(m_));
  xb_ = Eigen::VectorXd::Ones(ix(m_));
}

void PackingSimplex::set_enabled(std::size_t column, bool enabled) {
  enabled_[column] = enabled ? 1 : 0;
}

PackingSimplex::State PackingSimplex::save(bool with_inverse) const {
  State state{basis_, {}, {}, since_refactor_};
  if (with_inverse) {
    state.binv = binv_;
    state.xb = xb_;
  }
  return state;
}

void PackingSimplex::restore(const State& state) {
  for (const auto var : basis_) position_[var] = -1;
  basis_ = state.basis;
  for (std::size_t i = 0; i < m_; ++i) position_[basis_[i]] = static_cast<std::ptrdiff_t>(i);
  if (state.binv.size() == 0) {
    refactor();
    return;
  }
  binv_ = state.binv;
  xb_ = state.xb;
  since_refactor_ = state.since_refactor;
}

void PackingSimplex::refactor() {
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(ix(m_), ix(m_));
  for (std::size_t i = 0; i < m_; ++i) {
    const std::size_t var = basis_[i];
    if (var >= n_) {
      b(ix(var - n_), ix(i)) = 1.0;
    } else {
      for (std::uint8_t k = 0; k < lp_.column_length[var]; ++k) {
        b(lp_.column_rows[var][k], ix(i)) = 1.0;
      }
    }
  }
  binv_ = b.partialPivLu().inverse();
  xb_ = binv_ * Eigen::VectorXd::Ones(ix(m_));
  for (Eigen::Index i = 0; i < xb_.size(); ++i) {
    if (xb_(i) < 0.0 && xb_(i) > -1e-12) xb_(i) = 0.0;
  }
  since_refactor_ = 0;
}

double PackingSimplex::column_dot(const Eigen::VectorXd& v, std::size_t var) const {
  if (var >= n_) return v(ix(var - n_));
  double d = 0.0;
  for (std::uint8_t k = 0; k < lp_.column_length[var]; ++k) d += v(lp_.column_rows[var][k]);
  return d;
}

void PackingSimplex::pivot(std::size_t row, std::size_t entering, const Eigen::VectorXd& alpha,
                           double theta) {
  const auto r = ix(row);
  xb_ -= theta * alpha;
  xb_(r) = theta;
  for (Eigen::Index i = 0; i < xb_.size(); ++i) {
    if (xb_(i) < 0.0 && xb_(i) > -1e-12) xb_(i) = 0.0;
  }
  const Eigen::RowVectorXd pivot_row = binv_.row(r) / alpha(r);
  binv_.noalias() -= alpha * pivot_row;
  binv_.row(r) = pivot_row;
  ++since_refactor_;
  position_[basis_[row]] = -1;
  basis_[row] = entering;
  position_[entering] = static_cast<std::ptrdiff_t>(row);
}

void PackingSimplex::entering_column(std::size_t var, Eigen::VectorXd& alpha) const {
  if (var >= n_) {
    alpha = binv_.col(ix(var - n_));
    return;
  }
  alpha.setZero();
  for (std::uint8_t k = 0; k < lp_.column_length[var]; ++k) {
    alpha += binv_.col(lp_.column_rows[var][k]);
  }
}

// Dual simplex from a dual feasible basis: drives disabled basic columns to
// zero and repairs negative basic values. Returns false when the basis is
// not dual feasible or a step fails, leaving the rest to the primal phase.
bool PackingSimplex::dual_phase(std::size_t& iterations) {
  constexpr double kFeasTol = 1e-9;
  Eigen::VectorXd cb(ix(m_));
  for (std::size_t i = 0; i < m_; ++i) cb(ix(i)) = basis_[i] < n_ ? lp_.cost[basis_[i]] : 0.0;
  Eigen::VectorXd y = binv_.transpose() * cb;
  auto reduced = [&](std::size_t var) {
    return (var < n_ ? lp_.cost[var] : 0.0) - column_dot(y, var);
  };
  for (std::size_t j = 0; j < n_ + m_; ++j) {
    if (position_[j] >= 0 || (j < n_ && !enabled_[j])) continue;
    if (reduced(j) > 1e-7) return false;
  }

  Eigen::VectorXd alpha(ix(m_));
  const std::size_t limit = 10 * (m_ + n_) + 100;
  for (std::size_t iter = 0; iter < limit; ++iter) {
    if (since_refactor_ >= kRefactorEvery) {
      refactor();
      y = binv_.transpose() * cb;
    }
    std::ptrdiff_t leave = -1;
    double worst = kFeasTol;
    for (std::size_t i = 0; i < m_; ++i) {
      const auto var = basis_[i];
      const double x = xb_(ix(i));
      const double violation = (var < n_ && !enabled_[var]) ? std::abs(x) : -x;
      if (violation > worst) {
        worst = violation;
        leave = static_cast<std::ptrdiff_t>(i);
      }
    }
    if (leave < 0) return true;
    ++iterations;
    const auto row = static_cast<std::size_t>(leave);
    const double x_r = xb_(ix(row));
    const Eigen::VectorXd rho = binv_.row(ix(row)).transpose();

    std::size_t entering = n_ + m_;
    double best_ratio = std::numeric_limits<double>::infinity();
    double best_alpha = 0.0;
    for (std::size_t j = 0; j < n_ + m_; ++j) {
      if (position_[j] >= 0 || (j < n_ && !enabled_[j])) continue;
      const double a = column_dot(rho, j);
      // x_r falls as x_j rises when a > 0.
      if (x_r > 0 ? a <= kPivotTol : a >= -kPivotTol) continue;
      const double ratio = std::max(0.0, -reduced(j)) / std::abs(a);
      if (ratio < best_ratio - 1e-12 ||
          (ratio <= best_ratio + 1e-12 && std::abs(a) > best_alpha)) {
        best_ratio = ratio;
        best_alpha = std::abs(a);
        entering = j;
      }
    }
    if (entering == n_ + m_) return false;

    entering_column(entering, alpha);
    const double a_rq = alpha(ix(row));
    if (std::abs(a_rq) <= kPivotTol) return false;
    const double d_q = reduced(entering);
    const double theta = x_r / a_rq;
    y += (d_q / a_rq) * rho;
    pivot(row, entering, alpha, theta);
    cb(ix(row)) = entering < n_ ? lp_.cost[entering] : 0.0;
  }
  return false;
}

PackingLpResult PackingSimplex::solve() {
  PackingLpResult result;
  result.dual.assign(m_, 0.0);
  result.primal.assign(n_, 0.0);

  if (m_ > 0 && n_ > 0) {
    std::size_t iterations = 0;
    dual_phase(iterations);

    Eigen::VectorXd cb(ix(m_));
    auto basic_cost = [&](std::size_t i) {
      const auto var = basis_[i];
      if (var >= n_) return 0.0;
      if (enabled_[var]) return lp_.cost[var];
      return xb_(ix(i)) > 1e-9 ? -big_m_ : 0.0;
    };
    for (std::size_t i = 0; i < m_; ++i) cb(ix(i)) = basic_cost(i);
    Eigen::VectorXd y = binv_.transpose() * cb;
    Eigen::VectorXd alpha(ix(m_));

    const std::size_t max_iterations = 50 * (m_ + n_) + 1000;
    std::size_t degenerate_run = 0;
    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
      if (since_refactor_ >= kRefactorEvery) {
        refactor();
        y = binv_.transpose() * cb;
      }

      const bool bland = degenerate_run >= kDegenerateLimit;
      std::size_t entering = n_ + m_;
      double best = kPriceTol;
      double entering_d = 0.0;
      for (std::size_t j = 0; j < n_ + m_; ++j) {
        if (position_[j] >= 0 || (j < n_ && !enabled_[j])) continue;
        const double d = (j < n_ ? lp_.cost[j] : 0.0) - column_dot(y, j);
        if (d > best) {
          entering = j;
          entering_d = d;
          if (bland) break;
          best = d;
        }
      }
      if (entering == n_ + m_) {
        result.converged = true;
        break;
      }
      ++iterations;
      entering_column(entering, alpha);

      std::ptrdiff_t leave = -1;
      double theta = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < m_; ++i) {
        const double a = alpha(ix(i));
        double t;
        const auto var = basis_[i];
        if (a > kPivotTol) {
          t = xb_(ix(i)) / a;
        } else if (a < -kPivotTol && var < n_ && !enabled_[var] && xb_(ix(i)) <= 1e-9) {
          t = 0.0;  // a disabled column may not rise from zero
        } else {
          continue;
        }
        if (t < theta - 1e-12 ||
            (t <= theta + 1e-12 && leave >= 0 && var < basis_[static_cast<std::size_t>(leave)])) {
          theta = std::min(theta, t);
          leave = static_cast<std::ptrdiff_t>(i);
        }
      }
      if (leave < 0) break;  // unbounded; cannot happen for packing rows
      const auto row = static_cast<std::size_t>(leave);

      degenerate_run = theta <= 1e-12 ? degenerate_run + 1 : 0;
      const Eigen::VectorXd rho = binv_.row(ix(row)).transpose();
      y += (entering_d / alpha(ix(row))) * rho;
      pivot(row, entering, alpha, theta);
      cb(ix(row)) = entering < n_ ? lp_.cost[entering] : 0.0;
    }
    result.iterations = iterations;

    y = binv_.transpose() * cb;
    for (std::size_t i = 0; i < m_; ++i) result.dual[i] = std::max(0.0, y(ix(i)));
    for (std::size_t i = 0; i < m_; ++i) {
      const auto var = basis_[i];
      if (var >= n_) continue;
      if (enabled_[var]) {
        result.primal[var] = std::clamp(xb_(ix(i)), 0.0, 1.0);
      } else if (xb_(ix(i)) > 1e-9) {
        result.converged = false;
      }
    }
  }

  // Rows with no enabled column are unconstrained; the rest are made
  // feasible so the dual sum is a valid bound regardless of round-off or an
  // early stop.
  std::vector<char> live(m_, 0);
  for (std::size_t j = 0; j < n_; ++j) {
    if (!enabled_[j]) continue;
    for (std::uint8_t k = 0; k < lp_.column_length[j]; ++k) live[lp_.column_rows[j][k]] = 1;
  }
  for (std::size_t i = 0; i < m_; ++i) {
    if (!live[i] || !std::isfinite(result.dual[i]) || result.dual[i] > big_m_ * 1e-3) {
      result.dual[i] = 0.0;
    }
  }
  for (std::size_t j = 0; j < n_; ++j) {
    if (!enabled_[j]) continue;
    double covered = 0.0;
    for (std::uint8_t k = 0; k < lp_.column_length[j]; ++k) {
      covered += result.dual[lp_.column_rows[j][k]];
    }
    if (lp_.cost[j] > covered) result.dual[lp_.column_rows[j][0]] += lp_.cost[j] - covered;
  }
  result.bound = 0.0;
  for (const double v : result.dual) result.bound += v;
  return result;
}

PackingLpResult solve_packing_lp(const PackingLp& lp) { return PackingSimplex(lp).solve(); }

}  // namespace kep::detail
