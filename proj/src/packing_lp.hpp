// packing_lp.hpp
// LP relaxation of cycle packing: max c'x s.t. Ax <= 1, x >= 0, where every
// column of A has at most three unit entries.
#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

namespace kep::detail {

struct PackingLp {
  std::size_t rows = 0;
  std::vector<std::array<std::uint32_t, 3>> column_rows;
  std::vector<std::uint8_t> column_length;
  std::vector<double> cost;

  std::size_t columns() const { return cost.size(); }
  void add_column(const std::uint32_t* rows_begin, std::uint8_t length, double c);
};

struct PackingLpResult {
  /// Weak-duality upper bound: sum of `dual`, which is non-negative and
  /// feasible for every enabled column (repaired after the simplex).
  double bound = 0.0;
  std::vector<double> dual;
  std::vector<double> primal;  // zero for disabled columns
  bool converged = false;
  std::size_t iterations = 0;
};

/// Simplex that keeps its basis between calls. Columns can be
/// disabled and re-enabled; a solve starts from the previous basis, which
/// stays primal feasible because the right-hand side never changes.
class PackingSimplex {
 public:
  explicit PackingSimplex(PackingLp lp);

  void set_enabled(std::size_t column, bool enabled);
  bool enabled(std::size_t column) const { return enabled_[column] != 0; }

  PackingLpResult solve();

  /// Without the inverse a restore refactorizes the basis.
  struct State {
    std::vector<std::size_t> basis;
    Eigen::MatrixXd binv;
    Eigen::VectorXd xb;
    std::size_t since_refactor = 0;
  };
  State save(bool with_inverse = true) const;
  std::size_t rows() const { return m_; }
  void restore(const State& state);

 private:
  double column_dot(const Eigen::VectorXd& v, std::size_t var) const;
  void entering_column(std::size_t var, Eigen::VectorXd& alpha) const;
  void pivot(std::size_t row, std::size_t entering, const Eigen::VectorXd& alpha, double theta);
  bool dual_phase(std::size_t& iterations);
  void refactor();

  PackingLp lp_;
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  double big_m_ = 1.0;
  std::vector<char> enabled_;
  std::vector<std::size_t> basis_;
  std::vector<std::ptrdiff_t> position_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
  std::size_t since_refactor_ = 0;
};

/// Cold solve of the whole problem.
PackingLpResult solve_packing_lp(const PackingLp& lp);

}  // namespace kep::detail
