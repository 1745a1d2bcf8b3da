#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "sparsesdf/error.hpp"
#include "sparsesdf/solvers.hpp"

namespace sparsesdf {

std::string to_string(Method method) {
  switch (method) {
    case Method::BasisPursuit: return "bp";
    case Method::Ridgeless: return "ridgeless";
    case Method::Ridge: return "ridge";
    case Method::L1: return "l1";
  }
  throw InternalError("unknown method");
}

Method method_from_string(const std::string& name) {
  if (name == "bp" || name == "basis_pursuit" || name == "BasisPursuit") return Method::BasisPursuit;
  if (name == "ridgeless" || name == "rl" || name == "Ridgeless") return Method::Ridgeless;
  if (name == "ridge" || name == "Ridge") return Method::Ridge;
  if (name == "l1" || name == "L1" || name == "lasso") return Method::L1;
  throw ValidationError("unknown method '" + name + "'");
}

SdfSolution finalize_solution(Vector lambda, Method method, double alpha, const Matrix& F, double support_tol,
                              SolverDiagnostics diagnostics) {
  SdfSolution out;
  out.method = method;
  out.alpha = alpha;
  out.lambda = std::move(lambda);
  for (Index p = 0; p < out.lambda.size(); ++p) {
    if (std::abs(out.lambda(p)) > support_tol) out.support.push_back(static_cast<int>(p));
  }
  out.l1_norm = out.lambda.lpNorm<1>();
  out.l2_norm = out.lambda.norm();
  out.residual_inf = (F * out.lambda - Vector::Ones(F.rows())).cwiseAbs().maxCoeff();
  out.diagnostics = std::move(diagnostics);
  return out;
}

namespace {

Vector min_norm_least_squares(const Matrix& F, double rank_tol) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(F);
  cod.setThreshold(rank_tol);
  return cod.solve(Vector::Ones(F.rows()));
}

}  // namespace

SdfSolution ridgeless(const Matrix& F, const SolverOptions& options) {
  const Index T = F.rows();
  const Index P = F.cols();
  if (T < 1 || P < 1) throw ValidationError("ridgeless: empty factor matrix");
  if (!F.allFinite()) throw ValidationError("ridgeless: non-finite factor matrix");

  SolverDiagnostics diag;
  if (T > P) {
    // No interpolator exists generically; fall back to the least-squares fit.
    diag.underparameterized = true;
    diag.note = "T > P: minimum-norm least squares, reported as ridge(0)";
    return finalize_solution(min_norm_least_squares(F, options.rank_tol), Method::Ridge, 0.0, F,
                             options.support_tol, diag);
  }

  const Matrix gram = F * F.transpose();
  Eigen::LLT<Matrix> llt(gram);
  bool use_pinv = llt.info() != Eigen::Success;
  if (!use_pinv) {
    const double rcond = llt.rcond();
    diag.condition_estimate = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();
    use_pinv = diag.condition_estimate > options.condition_limit;
  }

  if (!use_pinv) {
    const Vector ones = Vector::Ones(T);
    Vector y = llt.solve(ones);
    y += llt.solve(ones - gram * y);
    Vector lambda = F.transpose() * y;
    SdfSolution out = finalize_solution(std::move(lambda), Method::Ridgeless, 0.0, F, options.support_tol, diag);
    if (out.residual_inf <= options.feasibility_tol) return out;
  }

  diag.pinv_fallback = true;
  diag.note = "Gram matrix ill-conditioned; pseudoinverse solve";
  return finalize_solution(min_norm_least_squares(F, options.rank_tol), Method::Ridgeless, 0.0, F,
                           options.support_tol, diag);
}

SdfSolution ridge(const Matrix& F, double alpha, const SolverOptions& options) {
  if (!(alpha > 0.0)) throw ValidationError("ridge: alpha must be > 0");
  const Index T = F.rows();
  const Index P = F.cols();
  if (T < 1 || P < 1) throw ValidationError("ridge: empty factor matrix");
  // Normal equations (F'F + 2 T alpha I) lambda = F' 1, solved in whichever
  // of the T- or P-dimensional forms is smaller.
  const double shift = 2.0 * static_cast<double>(T) * alpha;
  const Vector ones = Vector::Ones(T);
  Vector lambda;
  if (P >= T) {
    Matrix K = F * F.transpose();
    K.diagonal().array() += shift;
    lambda = F.transpose() * K.llt().solve(ones);
  } else {
    Matrix K = F.transpose() * F;
    K.diagonal().array() += shift;
    lambda = K.llt().solve(F.transpose() * ones);
  }
  return finalize_solution(std::move(lambda), Method::Ridge, alpha, F, options.support_tol);
}

nlohmann::json to_json(const SdfSolution& s) {
  const SolverDiagnostics& d = s.diagnostics;
  return {{"method", to_string(s.method)},
          {"alpha", s.alpha},
          {"support_size", s.support.size()},
          {"support", s.support},
          {"l1_norm", s.l1_norm},
          {"l2_norm", s.l2_norm},
          {"residual_inf", s.residual_inf},
          {"diagnostics",
           {{"iterations", d.iterations},
            {"bland_pivots", d.bland_pivots},
            {"degenerate_pivots", d.degenerate_pivots},
            {"refactorizations", d.refactorizations},
            {"tie_break_pivots", d.tie_break_pivots},
            {"dropped_rows", d.dropped_rows},
            {"pinv_fallback", d.pinv_fallback},
            {"underparameterized", d.underparameterized},
            {"condition_estimate", d.condition_estimate},
            {"duality_gap", d.duality_gap},
            {"note", d.note}}}};
}

nlohmann::json to_json(const SolverOptions& o) {
  return {{"feasibility_tol", o.feasibility_tol},
          {"optimality_tol", o.optimality_tol},
          {"duality_gap_tol", o.duality_gap_tol},
          {"support_tol", o.support_tol},
          {"rank_tol", o.rank_tol},
          {"condition_limit", o.condition_limit},
          {"max_iterations", o.max_iterations},
          {"refactor_interval", o.refactor_interval},
          {"degenerate_streak_for_bland", o.degenerate_streak_for_bland},
          {"l1_max_sweeps", o.l1_max_sweeps},
          {"l1_change_tol", o.l1_change_tol}};
}

SolverOptions solver_options_from_json(const nlohmann::json& j, SolverOptions o) {
  if (!j.is_object()) throw ValidationError("solver options must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw ValidationError("solver option '" + key + "' must be a number");
    if (key == "feasibility_tol") o.feasibility_tol = value.get<double>();
    else if (key == "optimality_tol") o.optimality_tol = value.get<double>();
    else if (key == "duality_gap_tol") o.duality_gap_tol = value.get<double>();
    else if (key == "support_tol") o.support_tol = value.get<double>();
    else if (key == "rank_tol") o.rank_tol = value.get<double>();
    else if (key == "condition_limit") o.condition_limit = value.get<double>();
    else if (key == "max_iterations") o.max_iterations = value.get<long>();
    else if (key == "refactor_interval") o.refactor_interval = value.get<int>();
    else if (key == "degenerate_streak_for_bland") o.degenerate_streak_for_bland = value.get<int>();
    else if (key == "l1_max_sweeps") o.l1_max_sweeps = value.get<long>();
    else if (key == "l1_change_tol") o.l1_change_tol = value.get<double>();
    else throw ValidationError("unknown solver option '" + key + "'");
  }
  if (!(o.feasibility_tol > 0 && o.optimality_tol > 0 && o.duality_gap_tol > 0 && o.support_tol >= 0 &&
        o.rank_tol > 0 && o.condition_limit > 0 && o.max_iterations > 0 && o.refactor_interval > 0 &&
        o.degenerate_streak_for_bland > 0 && o.l1_max_sweeps > 0 && o.l1_change_tol > 0)) {
    throw ValidationError("solver options out of range");
  }
  return o;
}

}  // namespace sparsesdf
