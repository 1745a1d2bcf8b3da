#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparsesdf/metrics.hpp"
#include "sparsesdf/panel.hpp"
#include "sparsesdf/solvers.hpp"

namespace sparsesdf {

struct SweepConfig {
  int T = 60;
  std::vector<double> c_grid;
  int n_draws = 1;
  std::vector<Method> methods{Method::BasisPursuit, Method::Ridgeless};
  int oos_start = 0;  // first return-realization month, yyyymm
  int oos_end = 0;    // last return-realization month, inclusive
  std::uint64_t seed = 0;
  std::vector<double> bandwidth_grid{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double low_c_alpha = 1e-8;  // lasso penalty standing in for BP when P < T
  SolverOptions solver;
  MetricGrids metrics;
  int threads = 1;  // execution only; never affects results

  void validate() const;
  /// Round-half-to-even of c * T.
  static int level(double c, int T);
  std::vector<int> levels() const;
};

/// Per-window record of one solve.
struct WindowRecord {
  double ret = 0.0;      // NaN when the solve failed
  int support_size = -1;  // -1 when the solve failed
  long iterations = 0;
  double residual_inf = 0.0;
  std::string error;
};

/// Everything produced for one (c, draw, method).
struct SeriesResult {
  int c_index = 0;
  int draw = 0;
  Method method = Method::BasisPursuit;
  Method solver_used = Method::BasisPursuit;  // L1 or Ridge(0) on the low-c branch
  std::vector<WindowRecord> windows;  // aligned with SweepResult::oos_months
  std::vector<std::pair<std::size_t, SdfSolution>> spot_checks;  // (window, solution) for the first and last window
  int failed = 0;
  double seconds = 0.0;
  bool metrics_available = false;
  MetricsReport metrics;

  Vector returns() const;
};

/// Draw-averaged metrics for one (c, method).
struct MethodSummary {
  double c = 0.0;
  int P = 0;
  Method method = Method::BasisPursuit;
  bool low_c_branch = false;
  int draws_used = 0;
  int failed_windows = 0;
  int total_windows = 0;
  bool degraded = false;
  MetricsReport averaged;
};

struct SweepResult {
  SweepConfig config;
  std::vector<int> oos_months;
  std::vector<std::size_t> oos_slices;  // panel slice whose characteristics form each evaluation
  std::vector<SeriesResult> series;     // ordered by (c, draw, method)
  std::vector<MethodSummary> summary;   // ordered by (c, method)
  double seconds = 0.0;

  const SeriesResult& at(std::size_t c_index, int draw, std::size_t method_index) const;
};

/// Rolling one-month-ahead evaluation of every method over the complexity
/// grid. Throws ValidationError when the panel does not cover the requested
/// months and SweepError when more than half the cells at some c fail.
SweepResult run_sweep(const CharacteristicPanel& panel, const SweepConfig& config);

struct SupportStats {
  double c = 0.0;
  int P = 0;
  double mean = 0.0;
  double sd = 0.0;
  int min = 0;
  int max = 0;
  std::size_t count = 0;
};

/// Support-size distribution of basis-pursuit solves per c.
std::vector<SupportStats> support_curve(const SweepResult& result);

/// Shortest round-trip text for c, used in file names and tables.
std::string format_c(double c);

nlohmann::json to_json(const SweepConfig& config);

/// summary.json, returns_<c>_<method>.csv, supports.csv, meta.json.
void write_sweep(const SweepResult& result, const std::filesystem::path& dir, const nlohmann::json& extra_meta = {});

/// One row per (c, method): c, P, method, mean, vol, sharpe, hjd, then the tail and CE grids.
void write_curves_csv(const SweepResult& result, const std::filesystem::path& file);
void write_curves_csv(const std::vector<MethodSummary>& summary, const MetricGrids& grids,
                      const std::filesystem::path& file);

/// Draw-averaged metrics recomputed from the returns files of a sweep
/// directory, on the grids in `config`. Factor realizations are not stored, so hjd is NaN.
std::vector<MethodSummary> metrics_from_returns(const std::filesystem::path& run_dir, const SweepConfig& config);

}  // namespace sparsesdf
