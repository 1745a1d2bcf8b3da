// Basis pursuit, min ||lambda||_1 s.t. F lambda = 1, as the linear program
//
//   min 1'(u + v)  s.t.  F u - F v = 1,  u, v >= 0
//
// solved by a revised simplex that keeps an explicit basis inverse. Variable j
// in [0, P) is u_j (column +F_j), j in [P, 2P) is v_{j-P} (column -F_{j-P}).
// Any nonsingular set of T columns of F yields a feasible starting basis after
// choosing the sign of each column to match the sign of the basic solution, so
// no phase-one problem is needed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sparsesdf/error.hpp"
#include "sparsesdf/solvers.hpp"

namespace sparsesdf {

namespace {

class SplitSimplex {
 public:
  SplitSimplex(const Matrix& A, const SolverOptions& options)
      : A_(A), m_(A.rows()), P_(A.cols()), options_(options), is_basic_(2 * A.cols(), 0) {}

  void crash() {
    Eigen::ColPivHouseholderQR<Matrix> qr(A_);
    qr.setThreshold(options_.rank_tol);
    if (qr.rank() < m_) throw InternalError("basis pursuit: reduced system lost full row rank");
    std::vector<Index> cols(m_);
    for (Index i = 0; i < m_; ++i) cols[i] = qr.colsPermutation().indices()(i);
    Matrix B(m_, m_);
    for (Index i = 0; i < m_; ++i) B.col(i) = A_.col(cols[i]);
    const Vector z = B.partialPivLu().solve(Vector::Ones(m_));
    basis_.assign(m_, 0);
    for (Index i = 0; i < m_; ++i) {
      basis_[i] = z(i) >= 0.0 ? cols[i] : cols[i] + P_;
      is_basic_[basis_[i]] = 1;
    }
    refactor();
  }

  /// Runs simplex pivots with per-variable costs; `allowed` masks variables
  /// that may enter (empty = all).
  void optimize(const Vector& costs, const std::vector<char>& allowed, long& pivots_counter) {
    int degenerate_streak = 0;
    bool bland = false;
    long since_refactor = 0;
    while (true) {
      if (since_refactor >= options_.refactor_interval) {
        refactor();
        since_refactor = 0;
      }
      Vector cB(m_);
      for (Index i = 0; i < m_; ++i) cB(i) = costs(basis_[i]);
      const Vector y = Binv_.transpose() * cB;
      const Vector g = A_.transpose() * y;

      Index entering = -1;
      double best = -options_.optimality_tol;
      for (Index f = 0; f < P_; ++f) {
        for (int side = 0; side < 2; ++side) {
          const Index j = f + side * P_;
          if (is_basic_[j] || (!allowed.empty() && !allowed[j])) continue;
          const double d = costs(j) - (side == 0 ? g(f) : -g(f));
          if (bland) {
            if (d < -options_.optimality_tol && (entering < 0 || j < entering)) entering = j;
          } else if (d < best) {
            best = d;
            entering = j;
          }
        }
      }
      if (entering < 0) return;

      const Vector alpha = Binv_ * column(entering);
      const double alpha_scale = std::max(1.0, alpha.cwiseAbs().maxCoeff());
      const double pivot_tol = 1e-9 * alpha_scale;
      Index leave = -1;
      double theta = std::numeric_limits<double>::infinity();
      for (Index i = 0; i < m_; ++i) {
        if (alpha(i) <= pivot_tol) continue;
        const double ratio = std::max(x_(i), 0.0) / alpha(i);
        if (leave < 0 || ratio < theta - 1e-12 * (1.0 + theta)) {
          theta = ratio;
          leave = i;
        } else if (ratio <= theta + 1e-12 * (1.0 + theta)) {
          // Tie: Bland takes the lowest variable index, otherwise the larger pivot.
          const bool take = bland ? basis_[i] < basis_[leave] : alpha(i) > alpha(leave);
          if (take) {
            theta = std::min(theta, ratio);
            leave = i;
          }
        }
      }
      if (leave < 0) throw InternalError("basis pursuit: unbounded direction in a bounded-below program");

      x_ -= theta * alpha;
      x_(leave) = theta;
      const double pivot = alpha(leave);
      Binv_.row(leave) /= pivot;
      for (Index i = 0; i < m_; ++i) {
        if (i != leave && alpha(i) != 0.0) Binv_.row(i) -= alpha(i) * Binv_.row(leave);
      }
      is_basic_[basis_[leave]] = 0;
      basis_[leave] = entering;
      is_basic_[entering] = 1;

      ++iterations_;
      ++pivots_counter;
      ++since_refactor;
      if (bland) ++bland_pivots_;
      if (theta <= 1e-12) {
        ++degenerate_pivots_;
        if (++degenerate_streak > options_.degenerate_streak_for_bland) bland = true;
      } else {
        degenerate_streak = 0;
        bland = false;
      }
      if (iterations_ > options_.max_iterations) {
        throw DivergedError("basis pursuit: simplex iteration limit " + std::to_string(options_.max_iterations) +
                                " reached",
                            iterations_);
      }
    }
  }

  void refactor(int refinement_steps = 1) {
    Matrix B(m_, m_);
    for (Index i = 0; i < m_; ++i) B.col(i) = column(basis_[i]);
    Eigen::PartialPivLU<Matrix> lu(B);
    Binv_ = lu.inverse();
    const Vector ones = Vector::Ones(m_);
    x_ = lu.solve(ones);
    for (int step = 0; step < refinement_steps; ++step) x_ += lu.solve(ones - B * x_);
    ++refactorizations_;
  }

  Vector column(Index j) const { return j < P_ ? Vector(A_.col(j)) : Vector(-A_.col(j - P_)); }

  /// Duals y = B^{-T} 1 for the unit-cost objective.
  Vector unit_duals() const { return Binv_.transpose() * Vector::Ones(m_); }

  Vector lambda() const {
    Vector out = Vector::Zero(P_);
    for (Index i = 0; i < m_; ++i) {
      const Index j = basis_[i];
      if (j < P_) {
        out(j) += x_(i);
      } else {
        out(j - P_) -= x_(i);
      }
    }
    return out;
  }

  const std::vector<char>& is_basic() const { return is_basic_; }
  long iterations() const { return iterations_; }
  long bland_pivots() const { return bland_pivots_; }
  long degenerate_pivots() const { return degenerate_pivots_; }
  long refactorizations() const { return refactorizations_; }

 private:
  const Matrix& A_;
  Index m_;
  Index P_;
  SolverOptions options_;
  std::vector<Index> basis_;
  std::vector<char> is_basic_;
  Matrix Binv_;
  Vector x_;
  long iterations_ = 0;
  long bland_pivots_ = 0;
  long degenerate_pivots_ = 0;
  long refactorizations_ = 0;
};

}  // namespace

SdfSolution basis_pursuit(const Matrix& F, const SolverOptions& options) {
  const Index T = F.rows();
  const Index P = F.cols();
  if (T < 1 || P < 1) throw ValidationError("basis_pursuit: empty factor matrix");
  if (!F.allFinite()) throw ValidationError("basis_pursuit: non-finite factor matrix");

  // Keep a maximal set of linearly independent rows.
  Eigen::ColPivHouseholderQR<Matrix> row_qr(F.transpose());
  row_qr.setThreshold(options.rank_tol);
  const Index rank = row_qr.rank();
  if (rank == 0) throw InfeasibleError("basis_pursuit: F is zero, so F lambda = 1 has no solution");
  std::vector<Index> rows(rank);
  for (Index i = 0; i < rank; ++i) rows[i] = row_qr.colsPermutation().indices()(i);
  std::sort(rows.begin(), rows.end());
  Matrix A(rank, P);
  for (Index i = 0; i < rank; ++i) A.row(i) = F.row(rows[i]);

  SolverDiagnostics diag;
  diag.dropped_rows = static_cast<int>(T - rank);
  if (diag.dropped_rows > 0) diag.note = "dropped linearly dependent rows";

  SplitSimplex lp(A, options);
  lp.crash();
  long pivots = 0;
  lp.optimize(Vector::Ones(2 * P), {}, pivots);

  // Secondary pass over the optimal face: variables with zero reduced cost
  // under the optimal duals, costed by feature index so low indices win ties.
  const Vector y = lp.unit_duals();
  const Vector g = A.transpose() * y;
  std::vector<char> face(2 * P, 0);
  bool has_alternatives = false;
  for (Index f = 0; f < P; ++f) {
    for (int side = 0; side < 2; ++side) {
      const Index j = f + side * P;
      const double d = 1.0 - (side == 0 ? g(f) : -g(f));
      if (lp.is_basic()[j]) {
        face[j] = 1;
      } else if (std::abs(d) <= options.optimality_tol) {
        face[j] = 1;
        has_alternatives = true;
      }
    }
  }
  if (has_alternatives) {
    Vector index_costs(2 * P);
    for (Index f = 0; f < P; ++f) index_costs(f) = index_costs(f + P) = static_cast<double>(f + 1);
    lp.optimize(index_costs, face, diag.tie_break_pivots);
  }
  lp.refactor(3);  // fresh basic solution; eta updates drift on ill-conditioned bases

  // The certificate uses the duals of the unit-cost optimum; the tie-break
  // pass only moves within the face those duals certify.
  Vector lambda = lp.lambda();
  const double dual_infeas = g.cwiseAbs().maxCoeff() - 1.0;
  const double primal = lambda.lpNorm<1>();
  const double dual = y.sum();
  diag.iterations = lp.iterations();
  diag.bland_pivots = lp.bland_pivots();
  diag.degenerate_pivots = lp.degenerate_pivots();
  diag.refactorizations = lp.refactorizations();
  diag.objective = primal;
  diag.duality_gap = std::abs(primal - dual) / std::max(1.0, std::abs(primal));
  if (dual_infeas > 10 * options.optimality_tol || diag.duality_gap > options.duality_gap_tol) {
    diag.note += diag.note.empty() ? "" : "; ";
    diag.note += "optimality certificate outside tolerance";
  }

  SdfSolution out = finalize_solution(std::move(lambda), Method::BasisPursuit, 0.0, F, options.support_tol, diag);
  if (out.residual_inf > options.feasibility_tol) {
    if (rank < T) {
      throw InfeasibleError("basis_pursuit: rows of F are dependent and inconsistent with F lambda = 1 (residual " +
                            std::to_string(out.residual_inf) + ")");
    }
    throw InternalError("basis_pursuit: interpolation residual " + std::to_string(out.residual_inf) +
                        " above tolerance");
  }
  return out;
}

}  // namespace sparsesdf
