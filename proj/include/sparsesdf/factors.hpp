#pragma once

#include <cstddef>
#include <vector>

#include "sparsesdf/features.hpp"
#include "sparsesdf/panel.hpp"
#include "sparsesdf/types.hpp"

namespace sparsesdf {

/// F = S' R / sqrt(N).
Vector managed_factor(const Matrix& S, const Vector& R_next);

/// Training window plus the evaluation-month factor that follows it.
struct FactorMatrix {
  Matrix F_in;                // T x P; row j built from slice t_start + j
  std::vector<Vector> F_oos;  // factor vectors for evaluation months
  std::vector<int> oos_months;  // return-realization month of each F_oos entry
  std::size_t t_start = 0;
  int T = 0;
  int P = 0;
};

/// Rows from slices [t_start, t_start + T) and the out-of-sample factor from
/// slice t_start + T, whose characteristics are known at formation time.
FactorMatrix build_window(const CharacteristicPanel& panel, const FeatureDraw& draw, std::size_t t_start, int T);

/// One managed-factor row per panel slice, using expand_unscaled(); multiply
/// by sqrt(2/P) (or take a column prefix and rescale) to recover a level-P matrix.
Matrix unscaled_factor_panel(const CharacteristicPanel& panel, const FeatureDraw& draw);

/// Level-P factor rows from an unscaled P_max factor panel of a nested draw.
Matrix nested_level(const Matrix& unscaled, int P);

}  // namespace sparsesdf
