#include "sparsesdf/theory.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sparsesdf/error.hpp"
#include "sparsesdf/factors.hpp"
#include "sparsesdf/features.hpp"

namespace sparsesdf {

RowSpaceProjector::RowSpaceProjector(const Matrix& F, double rank_tol) : F_(F) {
  const Index T = F.rows();
  const Index P = F.cols();
  if (T < 1 || P < T) throw ValidationError("projector: need 1 <= T <= P, got T=" + std::to_string(T) + " P=" + std::to_string(P));
  if (!F.allFinite()) throw ValidationError("projector: non-finite factor matrix");
  Eigen::ColPivHouseholderQR<Matrix> qr(F.transpose());
  qr.setThreshold(rank_tol);
  if (qr.rank() < T) {
    throw ValidationError("projector: rank(F) = " + std::to_string(qr.rank()) + " < T = " + std::to_string(T));
  }
  // Pivoting is only for the rank decision; an unpivoted QR gives R'R = FF'.
  Eigen::HouseholderQR<Matrix> plain(F.transpose());
  R_ = plain.matrixQR().topRows(T).triangularView<Eigen::Upper>();
}

Vector RowSpaceProjector::project(const Vector& v) const {
  if (v.size() != P()) throw ValidationError("projector: vector length mismatch");
  Vector z = F_ * v;
  R_.transpose().triangularView<Eigen::Lower>().solveInPlace(z);
  R_.triangularView<Eigen::Upper>().solveInPlace(z);
  return F_.transpose() * z;
}

Vector RowSpaceProjector::kernel_component(const Vector& v) const { return v - project(v); }

Matrix RowSpaceProjector::materialize() const {
  Matrix W = F_;  // T x P
  R_.transpose().triangularView<Eigen::Lower>().solveInPlace(W);  // Q' = R^{-T} F
  return W.transpose() * W;
}

ProjectorDecomposition decompose(const Matrix& F, const Vector& mu, Index materialize_limit) {
  if (mu.size() != F.cols()) throw ValidationError("decompose: mu length differs from P");
  const RowSpaceProjector proj(F);
  ProjectorDecomposition out;
  out.mu = mu;
  if (F.cols() <= materialize_limit) {
    out.row_projector = proj.materialize();
    out.kernel_projector = Matrix::Identity(F.cols(), F.cols()) - out.row_projector;
    out.mu_par = out.row_projector * mu;
    out.mu_perp = out.kernel_projector * mu;
  } else {
    out.mu_par = proj.project(mu);
    out.mu_perp = mu - out.mu_par;
  }
  return out;
}

namespace {

double alignment(double dot, double a, double b, bool& undefined) {
  undefined = a < 1e-12 || b < 1e-12;
  if (undefined) return 0.0;
  return std::clamp(dot / (a * b), -1.0, 1.0);
}

void check_interpolates(const Matrix& F, const SdfSolution& s, double tol, const char* name) {
  if (s.lambda.size() != F.cols()) throw ValidationError(std::string("mean_gap: ") + name + " has wrong length");
  const double r = (F * s.lambda - Vector::Ones(F.rows())).cwiseAbs().maxCoeff();
  if (!(r <= tol)) {
    throw ValidationError(std::string("mean_gap: ") + name + " does not interpolate (residual " + std::to_string(r) + ")");
  }
}

Vector column_mean_of(const Matrix& X) {
  if (X.rows() < 1) throw ValidationError("mean oracle: no factor realizations");
  return X.colwise().mean().transpose();
}

Vector scaled_prefix(const Vector& means, Index P, bool rff) {
  if (P < 1 || P > means.size()) {
    throw ValidationError("mean oracle: level " + std::to_string(P) + " outside [1, " + std::to_string(means.size()) + "]");
  }
  Vector out = means.head(P);
  if (rff) out *= std::sqrt(2.0 / static_cast<double>(P));
  return out;
}

}  // namespace

GapReport mean_gap(const Matrix& F, const Vector& mu, const SdfSolution& bp, const SdfSolution& rl,
                   double interp_tol) {
  if (mu.size() != F.cols()) throw ValidationError("mean_gap: mu length differs from P");
  check_interpolates(F, bp, interp_tol, "bp");
  check_interpolates(F, rl, interp_tol, "rl");
  const RowSpaceProjector proj(F);
  const Vector mu_perp = proj.kernel_component(mu);
  const Vector h = bp.lambda - rl.lambda;

  GapReport r;
  r.gap_direct = mu.dot(bp.lambda) - mu.dot(rl.lambda);
  r.gap_identity = mu_perp.dot(h);
  r.h_norm = h.norm();
  r.mu_perp_norm = mu_perp.norm();
  r.cos_theta = alignment(r.gap_identity, r.mu_perp_norm, r.h_norm, r.angle_undefined);
  r.kernel_residual = (F * h).cwiseAbs().maxCoeff();
  return r;
}

SampleMeanOracle::SampleMeanOracle(Matrix unscaled_factors, bool rff_scaling)
    : column_means_(column_mean_of(unscaled_factors)), rff_scaling_(rff_scaling) {}

Vector SampleMeanOracle::mean(Index P) const { return scaled_prefix(column_means_, P, rff_scaling_); }

PlantedMeanOracle::PlantedMeanOracle(const SyntheticPanel& synth, const FeatureDraw& draw, std::size_t first_slice,
                                     std::size_t last_slice, bool rff_scaling)
    : rff_scaling_(rff_scaling) {
  if (first_slice >= last_slice || last_slice > synth.panel.size()) {
    throw ValidationError("planted mean oracle: empty or out-of-range slice range");
  }
  Vector acc = Vector::Zero(draw.P());
  for (std::size_t k = first_slice; k < last_slice; ++k) {
    const MonthSlice& m = synth.panel[k];
    acc += managed_factor(expand_unscaled(draw, m.Z), planted_expected_returns(synth, m));
  }
  column_means_ = acc / static_cast<double>(last_slice - first_slice);
}

Vector PlantedMeanOracle::mean(Index P) const { return scaled_prefix(column_means_, P, rff_scaling_); }

GapBoundReport complexity_gap_bound(const std::vector<Matrix>& nested, const MeanOracle& oracle,
                                    const SolverOptions& options) {
  if (nested.size() < 2) throw ValidationError("complexity_gap_bound: need at least 2 complexity levels");
  GapBoundReport rep;
  rep.mean_oracle = oracle.kind();
  rep.levels.resize(nested.size());
  for (std::size_t i = 0; i < nested.size(); ++i) {
    const Matrix& F = nested[i];
    if (i > 0 && (F.rows() != nested[0].rows() || F.cols() <= nested[i - 1].cols())) {
      throw ValidationError("complexity_gap_bound: levels must share T and strictly increase in P");
    }
    const auto bp = basis_pursuit(F, options);
    const auto rl = ridgeless(F, options);
    const GapReport g = mean_gap(F, oracle.mean(F.cols()), bp, rl);
    GapLevel& lv = rep.levels[i];
    lv.P = F.cols();
    lv.v_P = bp.l1_norm;
    lv.mu_perp_norm = g.mu_perp_norm;
    lv.h_norm = g.h_norm;
    lv.cos_theta = g.cos_theta;
    lv.angle_undefined = g.angle_undefined;
    lv.gap = g.gap_direct;
    lv.gap_identity = g.gap_identity;
  }

  rep.mu_perp_nondecreasing = true;
  rep.mu_perp_increasing = true;
  rep.h_floor = rep.levels.front().h_norm;
  rep.rho_floor = rep.levels.front().cos_theta;
  bool any_undefined = false;
  for (std::size_t i = 0; i < rep.levels.size(); ++i) {
    const GapLevel& lv = rep.levels[i];
    rep.h_floor = std::min(rep.h_floor, lv.h_norm);
    rep.rho_floor = std::min(rep.rho_floor, lv.cos_theta);
    any_undefined = any_undefined || lv.angle_undefined;
    if (i > 0) {
      const double prev = rep.levels[i - 1].mu_perp_norm;
      const double slack = 1e-12 * std::max(1.0, prev);
      if (lv.mu_perp_norm < prev - slack) rep.mu_perp_nondecreasing = false;
      if (!(lv.mu_perp_norm > prev)) rep.mu_perp_increasing = false;
    }
  }
  rep.h_bounded_below = rep.h_floor > 1e-12;
  rep.cos_bounded_below = rep.rho_floor > 0.0 && !any_undefined;
  rep.bound_claimed = rep.h_bounded_below && rep.cos_bounded_below;

  const double rho = std::max(rep.rho_floor, 0.0);
  rep.bound_holds = true;
  for (GapLevel& lv : rep.levels) {
    lv.implied_bound = rep.h_floor * rho * lv.mu_perp_norm;
    const double slack = 1e-10 * std::max(1.0, std::abs(lv.gap));
    if (lv.gap < lv.implied_bound - slack) rep.bound_holds = false;
  }
  return rep;
}

ScaleChain scale_chain(const SdfSolution& bp, const Matrix& Sigma) {
  const Index P = bp.lambda.size();
  if (Sigma.rows() != P || Sigma.cols() != P) throw ValidationError("scale_chain: Sigma must be P x P");
  if (!Sigma.allFinite()) throw ValidationError("scale_chain: non-finite Sigma");
  const double scale = std::max(1.0, Sigma.cwiseAbs().maxCoeff());
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw ValidationError("scale_chain: Sigma is not symmetric");
  }
  ScaleChain out;
  if (P > 0) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Sigma, Eigen::EigenvaluesOnly);
    out.eig_max = std::max(eig.eigenvalues().maxCoeff(), 0.0);
  }
  const double root = std::sqrt(out.eig_max);
  out.vol = std::sqrt(std::max(bp.lambda.dot(Sigma * bp.lambda), 0.0));
  out.l2_bound = root * bp.lambda.norm();
  out.bound = root * bp.lambda.lpNorm<1>();
  if (out.vol > out.l2_bound + 1e-10 * std::max(1.0, out.l2_bound) || out.l2_bound > out.bound + 1e-10) {
    throw InternalError("scale_chain: vol <= sigma ||lambda||_2 <= sigma ||lambda||_1 violated");
  }
  return out;
}

nlohmann::json to_json(const GapReport& r) {
  return {{"gap_direct", r.gap_direct},     {"gap_identity", r.gap_identity}, {"h_norm", r.h_norm},
          {"mu_perp_norm", r.mu_perp_norm}, {"cos_theta", r.cos_theta},       {"angle_undefined", r.angle_undefined},
          {"kernel_residual", r.kernel_residual}};
}

nlohmann::json to_json(const GapBoundReport& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (const GapLevel& lv : r.levels) {
    levels.push_back({{"P", lv.P},
                      {"v_P", lv.v_P},
                      {"mu_perp_norm", lv.mu_perp_norm},
                      {"h_norm", lv.h_norm},
                      {"cos_theta", lv.cos_theta},
                      {"angle_undefined", lv.angle_undefined},
                      {"gap", lv.gap},
                      {"gap_identity", lv.gap_identity},
                      {"implied_bound", lv.implied_bound}});
  }
  return {{"mean_oracle", r.mean_oracle},
          {"levels", levels},
          {"mu_perp_nondecreasing", r.mu_perp_nondecreasing},
          {"mu_perp_increasing", r.mu_perp_increasing},
          {"h_bounded_below", r.h_bounded_below},
          {"cos_bounded_below", r.cos_bounded_below},
          {"h_floor", r.h_floor},
          {"rho_floor", r.rho_floor},
          {"bound_claimed", r.bound_claimed},
          {"bound_holds", r.bound_holds}};
}

}  // namespace sparsesdf
