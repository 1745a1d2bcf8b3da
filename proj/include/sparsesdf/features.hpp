#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "sparsesdf/types.hpp"

namespace sparsesdf {

/// Parameters that define one random Fourier feature expansion.
struct FeatureSpec {
  int P = 1;
  int D = 1;
  std::vector<double> bandwidth_grid{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::uint64_t seed = 0;
  int draw_index = 0;

  void validate() const;
};

/// Frozen realization of a FeatureSpec.
///
/// Feature p is generated from its own stream keyed by (seed, draw_index, p),
/// and the bandwidth from a stream keyed by (seed, draw_index) alone, so a
/// draw with P features is an exact prefix of the draw with P' >= P features.
struct FeatureDraw {
  FeatureSpec spec;
  Matrix omegas;  // P x D
  Vector phases;  // P, in [0, 2pi)
  double bandwidth = 0.0;

  int P() const { return static_cast<int>(omegas.rows()); }
  int D() const { return static_cast<int>(omegas.cols()); }
};

FeatureDraw draw_features(const FeatureSpec& spec);

/// Bandwidth chosen for (seed, draw_index); independent of P.
double draw_bandwidth(const FeatureSpec& spec);

/// S(i, p) = sqrt(2/P) cos(omega_p' Z_i + b_p).
Matrix expand(const FeatureDraw& draw, const Matrix& Z);

/// Same as expand() without the sqrt(2/P) factor.
Matrix expand_unscaled(const FeatureDraw& draw, const Matrix& Z);

/// True iff `small` is the leading-P prefix of `big` with the same bandwidth.
bool nest(const FeatureDraw& small, const FeatureDraw& big);

/// First P features of `draw`, re-tagged as a P-feature draw.
FeatureDraw prefix(const FeatureDraw& draw, int P);

/// Sidecar holding what is needed to regenerate a draw; matrices are never stored.
nlohmann::json to_json(const FeatureDraw& draw);
FeatureDraw regenerate(const nlohmann::json& sidecar);

}  // namespace sparsesdf
