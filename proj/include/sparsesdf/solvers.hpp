#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sparsesdf/types.hpp"

namespace sparsesdf {

enum class Method { BasisPursuit, Ridgeless, Ridge, L1 };

std::string to_string(Method method);
Method method_from_string(const std::string& name);

struct SolverOptions {
  double feasibility_tol = 1e-8;  // interpolation residual
  double optimality_tol = 1e-9;   // reduced-cost / dual feasibility
  double duality_gap_tol = 1e-9;  // relative
  double support_tol = 1e-9;
  double rank_tol = 1e-10;         // relative pivot threshold for rank decisions
  double condition_limit = 1e12;   // Gram condition above which ridgeless uses a pseudoinverse
  long max_iterations = 200000;    // simplex pivots
  int refactor_interval = 50;
  int degenerate_streak_for_bland = 30;
  long l1_max_sweeps = 100000;
  double l1_change_tol = 1e-10;
};

struct SolverDiagnostics {
  long iterations = 0;
  long bland_pivots = 0;
  long degenerate_pivots = 0;
  long refactorizations = 0;
  long tie_break_pivots = 0;
  int dropped_rows = 0;
  bool pinv_fallback = false;
  bool underparameterized = false;
  double condition_estimate = 0.0;
  double duality_gap = 0.0;
  double objective = 0.0;
  std::string note;
};

/// Coefficient vector of one SDF estimate plus derived summaries.
struct SdfSolution {
  Vector lambda;
  Method method = Method::BasisPursuit;
  double alpha = 0.0;
  std::vector<int> support;  // indices with |lambda_p| > support_tol
  double l1_norm = 0.0;
  double l2_norm = 0.0;
  double residual_inf = 0.0;  // max |F lambda - 1|
  SolverDiagnostics diagnostics;
};

/// Fills support, norms and residual from `lambda` and `F`.
SdfSolution finalize_solution(Vector lambda, Method method, double alpha, const Matrix& F, double support_tol,
                              SolverDiagnostics diagnostics = {});

/// Minimum-l2 interpolator F'(FF')^{-1} 1. With T > P (no interpolation
/// possible) returns the minimum-norm least-squares fit tagged Ridge(0).
SdfSolution ridgeless(const Matrix& F, const SolverOptions& options = {});

/// Minimum-l1 interpolator from a revised simplex on the split-variable LP.
/// The result is a basic solution, so at most rank(F) coefficients are nonzero.
/// Among optimal vertices, the secondary rule prefers low feature indices.
SdfSolution basis_pursuit(const Matrix& F, const SolverOptions& options = {});

/// argmin (1/2T)||1 - F lambda||^2 + alpha ||lambda||_2^2, closed form.
SdfSolution ridge(const Matrix& F, double alpha, const SolverOptions& options = {});

/// argmin (1/2T)||1 - F lambda||^2 + alpha ||lambda||_1 by cyclic coordinate
/// descent with active-set refits.
SdfSolution l1_path(const Matrix& F, double alpha, const SolverOptions& options = {});

nlohmann::json to_json(const SdfSolution& solution);
nlohmann::json to_json(const SolverOptions& options);
/// Overrides fields of `base` from an object; unknown keys are a ValidationError.
SolverOptions solver_options_from_json(const nlohmann::json& j, SolverOptions base = {});

}  // namespace sparsesdf
