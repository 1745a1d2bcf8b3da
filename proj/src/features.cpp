#include "sparsesdf/features.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sparsesdf/error.hpp"
#include "sparsesdf/rng.hpp"

namespace sparsesdf {

namespace {

constexpr std::uint64_t kBandwidthStream = 0xB4;
constexpr std::uint64_t kFeatureStream = 0xFE;

}  // namespace

void FeatureSpec::validate() const {
  if (P < 1) throw ValidationError("feature count P must be >= 1, got " + std::to_string(P));
  if (D < 1) throw ValidationError("input dimension D must be >= 1, got " + std::to_string(D));
  if (bandwidth_grid.empty()) throw ValidationError("bandwidth grid is empty");
  for (double s : bandwidth_grid) {
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("bandwidth grid entries must be positive");
  }
  if (draw_index < 0) throw ValidationError("draw_index must be non-negative");
}

double draw_bandwidth(const FeatureSpec& spec) {
  spec.validate();
  Stream stream(derive_seed(spec.seed, kBandwidthStream, spec.draw_index));
  return spec.bandwidth_grid[stream.index(spec.bandwidth_grid.size())];
}

FeatureDraw draw_features(const FeatureSpec& spec) {
  spec.validate();
  FeatureDraw draw;
  draw.spec = spec;
  draw.bandwidth = draw_bandwidth(spec);
  draw.omegas.resize(spec.P, spec.D);
  draw.phases.resize(spec.P);
  constexpr double two_pi = 2.0 * std::numbers::pi;
  for (int p = 0; p < spec.P; ++p) {
    Stream stream(derive_seed(spec.seed, kFeatureStream, spec.draw_index, p));
    for (int d = 0; d < spec.D; ++d) draw.omegas(p, d) = draw.bandwidth * stream.normal();
    double phase = two_pi * stream.uniform();
    if (phase >= two_pi) phase = 0.0;  // rounding guard
    draw.phases(p) = phase;
  }
  return draw;
}

Matrix expand_unscaled(const FeatureDraw& draw, const Matrix& Z) {
  if (Z.cols() != draw.D()) {
    throw ValidationError("expand: Z has " + std::to_string(Z.cols()) + " columns, draw expects D=" +
                          std::to_string(draw.D()));
  }
  Matrix S = Z * draw.omegas.transpose();
  S.rowwise() += draw.phases.transpose();
  return S.array().cos().matrix();
}

Matrix expand(const FeatureDraw& draw, const Matrix& Z) {
  const double scale = std::sqrt(2.0 / static_cast<double>(draw.P()));
  return scale * expand_unscaled(draw, Z);
}

bool nest(const FeatureDraw& small, const FeatureDraw& big) {
  if (small.P() > big.P() || small.D() != big.D()) return false;
  if (small.bandwidth != big.bandwidth) return false;
  const int p = small.P();
  return small.omegas == big.omegas.topRows(p) && small.phases == big.phases.head(p);
}

FeatureDraw prefix(const FeatureDraw& draw, int P) {
  if (P < 1 || P > draw.P()) {
    throw ValidationError("prefix: P=" + std::to_string(P) + " outside [1, " + std::to_string(draw.P()) + "]");
  }
  FeatureDraw out;
  out.spec = draw.spec;
  out.spec.P = P;
  out.bandwidth = draw.bandwidth;
  out.omegas = draw.omegas.topRows(P);
  out.phases = draw.phases.head(P);
  return out;
}

nlohmann::json to_json(const FeatureDraw& draw) {
  return {{"seed", draw.spec.seed},
          {"draw_index", draw.spec.draw_index},
          {"P", draw.spec.P},
          {"D", draw.spec.D},
          {"bandwidth", draw.bandwidth},
          {"bandwidth_grid", draw.spec.bandwidth_grid}};
}

FeatureDraw regenerate(const nlohmann::json& sidecar) {
  FeatureSpec spec;
  spec.seed = sidecar.at("seed").get<std::uint64_t>();
  spec.draw_index = sidecar.at("draw_index").get<int>();
  spec.P = sidecar.at("P").get<int>();
  spec.D = sidecar.at("D").get<int>();
  if (sidecar.contains("bandwidth_grid")) spec.bandwidth_grid = sidecar.at("bandwidth_grid").get<std::vector<double>>();
  FeatureDraw draw = draw_features(spec);
  if (sidecar.contains("bandwidth") && sidecar.at("bandwidth").get<double>() != draw.bandwidth) {
    throw ValidationError("feature sidecar bandwidth does not match regenerated draw");
  }
  return draw;
}

}  // namespace sparsesdf
