#include "sparsesdf/factors.hpp"

#include <cmath>
#include <string>

#include "sparsesdf/error.hpp"

namespace sparsesdf {

Vector managed_factor(const Matrix& S, const Vector& R_next) {
  if (S.rows() != R_next.size()) {
    throw ValidationError("managed_factor: S has " + std::to_string(S.rows()) + " rows but R has " +
                          std::to_string(R_next.size()) + " entries");
  }
  if (S.rows() < 1) throw ValidationError("managed_factor: empty cross-section");
  return S.transpose() * R_next / std::sqrt(static_cast<double>(S.rows()));
}

FactorMatrix build_window(const CharacteristicPanel& panel, const FeatureDraw& draw, std::size_t t_start, int T) {
  if (T < 1) throw ValidationError("build_window: T must be >= 1");
  if (panel.D() != draw.D()) throw ValidationError("build_window: panel D differs from feature draw D");
  const std::size_t needed = t_start + static_cast<std::size_t>(T) + 1;
  if (needed > panel.size()) {
    throw ValidationError("build_window: needs slices [" + std::to_string(t_start) + ", " +
                          std::to_string(needed - 1) + "] but panel has " + std::to_string(panel.size()) +
                          " (short by " + std::to_string(needed - panel.size()) + ")");
  }
  FactorMatrix out;
  out.t_start = t_start;
  out.T = T;
  out.P = draw.P();
  out.F_in.resize(T, draw.P());
  for (int j = 0; j < T; ++j) {
    const MonthSlice& m = panel[t_start + j];
    out.F_in.row(j) = managed_factor(expand(draw, m.Z), m.R_next).transpose();
  }
  const MonthSlice& eval = panel[t_start + T];
  out.F_oos.push_back(managed_factor(expand(draw, eval.Z), eval.R_next));
  out.oos_months.push_back(next_month(eval.month_id));
  if (!out.F_in.allFinite() || !out.F_oos.front().allFinite()) {
    throw ValidationError("build_window: non-finite factor values");
  }
  return out;
}

Matrix unscaled_factor_panel(const CharacteristicPanel& panel, const FeatureDraw& draw) {
  if (panel.D() != draw.D()) throw ValidationError("factor panel: panel D differs from feature draw D");
  Matrix out(static_cast<Index>(panel.size()), draw.P());
  for (std::size_t k = 0; k < panel.size(); ++k) {
    const MonthSlice& m = panel[k];
    out.row(static_cast<Index>(k)) = managed_factor(expand_unscaled(draw, m.Z), m.R_next).transpose();
  }
  return out;
}

Matrix nested_level(const Matrix& unscaled, int P) {
  if (P < 1 || P > unscaled.cols()) throw ValidationError("nested_level: P outside the available feature range");
  return std::sqrt(2.0 / static_cast<double>(P)) * unscaled.leftCols(P);
}

}  // namespace sparsesdf
