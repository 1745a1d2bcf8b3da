#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sparsesdf/types.hpp"

namespace sparsesdf {

struct SharpeStats {
  double mean = 0.0;
  double vol = 0.0;
  double sharpe = 0.0;
  bool undefined = false;  // vol == 0; sharpe is then reported as 0
};

/// Sample mean, N-1 standard deviation and their ratio. Needs N >= 2.
SharpeStats sharpe(const Vector& returns);

/// E[M F]' E[F F']^+ E[M F] with sample moments; singular values of E[FF']
/// below 1e-10 * the largest are treated as zero.
double hj_distance(const Vector& M_hat, const Matrix& F_oos);

struct TailCurves {
  std::vector<double> q;
  std::vector<double> quantile;  // k = ceil(qN) order statistic
  std::vector<double> es;        // mean of r <= Q_q; NaN for q > 0.5
  std::vector<double> utm;       // mean of r >= Q_q; NaN for q <= 0.5
};

/// Needs N >= 5 and every q in (0, 1).
TailCurves tail_curves(const Vector& returns, const std::vector<double>& q_grid);

/// CRRA certainty equivalent R_CE - 1, computed in the log domain; gamma = 1
/// is the geometric mean. `months` (optional, same length) names the offending
/// observation when a gross return is not positive.
double certainty_equivalent(const Vector& returns, double gamma, const std::vector<int>& months = {});

struct DominanceSummary {
  double pathwise_rate = 0.0;  // share of months with a > b
  double quantile_rate = 0.0;  // share of q with Q_q(a) >= Q_q(b)
  std::size_t n_obs = 0;
};

DominanceSummary dominance_summary(const Vector& a, const std::vector<int>& a_months, const Vector& b,
                                   const std::vector<int>& b_months, const std::vector<double>& q_grid);

struct MetricGrids {
  std::vector<double> q_grid{0.01, 0.05, 0.10, 0.25, 0.50, 0.75, 0.90, 0.95, 0.99};
  std::vector<double> gammas{1.0, 2.0, 5.0};
  void validate() const;
};

struct MetricsReport {
  double mean = 0.0;
  double vol = 0.0;
  double sharpe = 0.0;
  bool sharpe_undefined = false;
  double hjd = 0.0;  // NaN when no factor realizations were supplied
  TailCurves tails;
  std::vector<double> gammas;
  std::vector<double> ce;  // NaN where a gross return was not positive
  std::string ce_note;
  std::size_t n_obs = 0;
};

/// Full report. `F_oos` may be empty (0 columns), in which case hjd is NaN;
/// otherwise M_hat = 1 - returns is used.
MetricsReport compute_metrics(const Vector& returns, const std::vector<int>& months, const Matrix& F_oos,
                              const MetricGrids& grids = {});

nlohmann::json to_json(const MetricsReport& report);

}  // namespace sparsesdf
