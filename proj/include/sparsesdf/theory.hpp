#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sparsesdf/panel.hpp"
#include "sparsesdf/solvers.hpp"
#include "sparsesdf/types.hpp"

namespace sparsesdf {

/// Orthogonal projector onto row(F) for a full-row-rank T x P matrix, applied
/// as an operator: Pi v = F' R^{-1} R^{-T} F v with R'R = FF' taken from a
/// Householder QR of F' (FF' is never formed or inverted).
class RowSpaceProjector {
 public:
  /// Throws ValidationError when rank(F) < T.
  explicit RowSpaceProjector(const Matrix& F, double rank_tol = 1e-10);

  Vector project(const Vector& v) const;         // Pi v
  Vector kernel_component(const Vector& v) const;  // (I - Pi) v
  Matrix materialize() const;                    // P x P
  Index P() const { return F_.cols(); }
  Index T() const { return F_.rows(); }

 private:
  Matrix F_;
  Matrix R_;  // T x T upper triangular
};

struct ProjectorDecomposition {
  Matrix row_projector;     // Pi; empty when P exceeds the materialization limit
  Matrix kernel_projector;  // M = I - Pi; same rule
  Vector mu;
  Vector mu_par;   // Pi mu
  Vector mu_perp;  // M mu
};

ProjectorDecomposition decompose(const Matrix& F, const Vector& mu, Index materialize_limit = 2000);

struct GapReport {
  double gap_direct = 0.0;    // mu'lambda_BP - mu'lambda_RL
  double gap_identity = 0.0;  // mu_perp'h
  double h_norm = 0.0;
  double mu_perp_norm = 0.0;
  double cos_theta = 0.0;
  bool angle_undefined = false;  // a norm fell below 1e-12; cos_theta reported as 0
  double kernel_residual = 0.0;  // ||F h||_inf
};

/// Computes both sides of the mean-gap identity for one instance.
/// Throws ValidationError unless both solutions interpolate F within `interp_tol`.
GapReport mean_gap(const Matrix& F, const Vector& mu, const SdfSolution& bp, const SdfSolution& rl,
                   double interp_tol = 1e-8);

/// Supplies the mean factor vector mu_P at each complexity level.
class MeanOracle {
 public:
  virtual ~MeanOracle() = default;
  virtual Vector mean(Index P) const = 0;
  virtual std::string kind() const = 0;
};

/// Level-P mean = scale(P) * column means of the first P columns of a fixed
/// matrix of unscaled factor realizations.
class SampleMeanOracle : public MeanOracle {
 public:
  /// `rff_scaling` applies sqrt(2/P); otherwise levels are plain column prefixes.
  SampleMeanOracle(Matrix unscaled_factors, bool rff_scaling);
  Vector mean(Index P) const override;
  std::string kind() const override { return "sample"; }

 private:
  Vector column_means_;
  bool rff_scaling_;
};

/// Noise-free factor mean implied by a planted kernel: averages
/// S_t' E[R_{t+1} | Z_t] / sqrt(N_t) over the given slices.
class PlantedMeanOracle : public MeanOracle {
 public:
  PlantedMeanOracle(const SyntheticPanel& synth, const FeatureDraw& draw, std::size_t first_slice,
                    std::size_t last_slice, bool rff_scaling = true);
  Vector mean(Index P) const override;
  std::string kind() const override { return "planted"; }

 private:
  Vector column_means_;
  bool rff_scaling_;
};

struct GapLevel {
  Index P = 0;
  double v_P = 0.0;  // ||lambda_BP||_1
  double mu_perp_norm = 0.0;
  double h_norm = 0.0;
  double cos_theta = 0.0;
  bool angle_undefined = false;
  double gap = 0.0;
  double gap_identity = 0.0;
  double implied_bound = 0.0;
};

struct GapBoundReport {
  std::vector<GapLevel> levels;
  std::string mean_oracle;
  bool mu_perp_nondecreasing = false;  // condition (i), weak form
  bool mu_perp_increasing = false;     // condition (i), strict form
  bool h_bounded_below = false;        // condition (ii)
  bool cos_bounded_below = false;      // condition (iii)
  double h_floor = 0.0;
  double rho_floor = 0.0;
  bool bound_claimed = false;  // (ii) and (iii) hold on the sequence
  bool bound_holds = false;    // realized gap >= implied bound at every level
};

/// Evaluates the mean-gap decomposition along a nested sequence of factor
/// matrices (column prefixes of one expansion). Needs at least two levels.
GapBoundReport complexity_gap_bound(const std::vector<Matrix>& nested, const MeanOracle& oracle,
                                    const SolverOptions& options = {});

struct ScaleChain {
  double vol = 0.0;       // sqrt(lambda' Sigma lambda)
  double l2_bound = 0.0;  // sqrt(eig_max) ||lambda||_2
  double bound = 0.0;     // sqrt(eig_max) ||lambda||_1
  double eig_max = 0.0;
};

/// Throws ValidationError for a non-symmetric Sigma; InternalError if the
/// chain vol <= l2_bound <= bound is violated by more than 1e-10.
ScaleChain scale_chain(const SdfSolution& bp, const Matrix& Sigma);

nlohmann::json to_json(const GapReport& report);
nlohmann::json to_json(const GapBoundReport& report);

}  // namespace sparsesdf
