// Lasso for the SDF regression,
//
//   min (1/2T) ||1 - F lambda||^2 + alpha ||lambda||_1,
//
// by the homotopy (LARS-lasso) path from alpha_max = ||F'1||_inf / T down to
// the requested alpha, adding or dropping one coordinate per event. Cyclic
// coordinate descent at small alpha moves off-support coordinates by O(alpha)
// per sweep, which is useless near the basis-pursuit limit; the path is exact.
// The endpoint is polished on its active set and confirmed with coordinate
// sweeps until the largest coordinate change is below l1_change_tol.

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sparsesdf/error.hpp"
#include "sparsesdf/solvers.hpp"

namespace sparsesdf {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

struct ActiveSet {
  std::vector<Index> index;
  std::vector<double> sign;

  Index size() const { return static_cast<Index>(index.size()); }
  Matrix columns(const Matrix& F) const {
    Matrix out(F.rows(), size());
    for (Index a = 0; a < size(); ++a) out.col(a) = F.col(index[a]);
    return out;
  }
  Vector signs() const { return Eigen::Map<const Vector>(sign.data(), size()); }
};

}  // namespace

SdfSolution l1_path(const Matrix& F, double alpha, const SolverOptions& options) {
  if (!(alpha > 0.0)) throw ValidationError("l1_path: alpha must be > 0");
  const Index T = F.rows();
  const Index P = F.cols();
  if (T < 1 || P < 1) throw ValidationError("l1_path: empty factor matrix");
  if (!F.allFinite()) throw ValidationError("l1_path: non-finite factor matrix");
  const double inv_T = 1.0 / static_cast<double>(T);
  const Vector ones = Vector::Ones(T);

  SolverDiagnostics diag;
  Vector lambda = Vector::Zero(P);
  Vector corr = F.transpose() * ones * inv_T;  // F'(1 - F lambda) / T
  double level = corr.cwiseAbs().maxCoeff();
  std::vector<char> in_set(P, 0);
  ActiveSet active;

  if (level > alpha) {
    Index first = 0;
    corr.cwiseAbs().maxCoeff(&first);
    active.index.push_back(first);
    active.sign.push_back(corr(first) > 0 ? 1.0 : -1.0);
    in_set[first] = 1;
  }

  long steps = 0;
  while (level > alpha && active.size() > 0) {
    if (++steps > options.max_iterations) {
      throw DivergedError("l1_path: homotopy step limit reached", steps);
    }
    const Matrix FA = active.columns(F);
    const Matrix H = FA.transpose() * FA * inv_T;
    Eigen::LDLT<Matrix> ldlt(H);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.rcond() < 1e-14) {
      throw DivergedError("l1_path: active set became linearly dependent", steps);
    }
    const Vector dir = ldlt.solve(active.signs());   // d lambda_A / d(-level)
    const Vector a = F.transpose() * (FA * dir) * inv_T;  // d corr / d(-level)

    double gamma = level - alpha;
    Index event = -1;
    bool joins = false;
    for (Index j = 0; j < P; ++j) {
      if (in_set[j]) continue;
      for (const double s : {1.0, -1.0}) {
        const double denom = 1.0 - s * a(j);
        if (denom <= 1e-15) continue;
        const double g = (level - s * corr(j)) / denom;
        if (g > 1e-15 && g < gamma) {
          gamma = g;
          event = j;
          joins = true;
        }
      }
    }
    for (Index k = 0; k < active.size(); ++k) {
      const double lam = lambda(active.index[k]);
      if (dir(k) == 0.0) continue;
      const double g = -lam / dir(k);
      if (g > 1e-15 && g < gamma) {
        gamma = g;
        event = k;
        joins = false;
      }
    }

    for (Index k = 0; k < active.size(); ++k) lambda(active.index[k]) += gamma * dir(k);
    level -= gamma;
    corr = F.transpose() * (ones - F * lambda) * inv_T;

    if (event >= 0 && joins) {
      active.index.push_back(event);
      active.sign.push_back(corr(event) > 0 ? 1.0 : -1.0);
      in_set[event] = 1;
    } else if (event >= 0) {
      const Index j = active.index[event];
      lambda(j) = 0.0;
      in_set[j] = 0;
      active.index.erase(active.index.begin() + event);
      active.sign.erase(active.sign.begin() + event);
    } else {
      level = alpha;
    }
  }

  // Polish on the final active set: F_A'(1 - F_A lambda_A)/T = alpha s_A.
  if (active.size() > 0) {
    const Matrix FA = active.columns(F);
    const Matrix H = FA.transpose() * FA * inv_T;
    const Vector rhs = FA.transpose() * ones * inv_T - alpha * active.signs();
    const Vector sol = H.ldlt().solve(rhs);
    bool consistent = sol.allFinite();
    for (Index k = 0; consistent && k < active.size(); ++k) consistent = sol(k) * active.sign[k] > 0.0;
    if (consistent) {
      lambda.setZero();
      for (Index k = 0; k < active.size(); ++k) lambda(active.index[k]) = sol(k);
    }
  }
  diag.refactorizations = steps;

  // Coordinate sweeps confirm stationarity.
  const Vector col_sq = F.colwise().squaredNorm().transpose() * inv_T;
  Vector resid = ones - F * lambda;
  for (long sweep = 1; sweep <= options.l1_max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Index j = 0; j < P; ++j) {
      if (col_sq(j) == 0.0) continue;
      const double old = lambda(j);
      const double z = F.col(j).dot(resid) * inv_T + col_sq(j) * old;
      const double updated = soft_threshold(z, alpha) / col_sq(j);
      const double delta = updated - old;
      if (delta != 0.0) {
        resid.noalias() -= delta * F.col(j);
        lambda(j) = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    diag.iterations = sweep;
    if (max_change <= options.l1_change_tol) {
      diag.note = "homotopy steps: " + std::to_string(steps);
      return finalize_solution(std::move(lambda), Method::L1, alpha, F, options.support_tol, diag);
    }
  }
  throw DivergedError("l1_path: coordinate sweeps did not settle within " + std::to_string(options.l1_max_sweeps),
                      options.l1_max_sweeps);
}

}  // namespace sparsesdf
