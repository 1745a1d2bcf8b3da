#include "sparsesdf/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "parallel.hpp"
#include "sparsesdf/error.hpp"
#include "sparsesdf/factors.hpp"
#include "sparsesdf/features.hpp"
#include "sparsesdf/panel.hpp"
#include "sparsesdf/rng.hpp"

namespace sparsesdf {

namespace {

enum PropertyId { kSupport, kInterpolation, kLimits, kGapIdentity, kMonotone, kScaleChain, kFeasibleSet, kTable };

constexpr int kAssets = 40;
constexpr int kCharacteristics = 3;

// With few characteristics the default 0.5..1 bandwidths give nearly collinear
// features; this grid keeps omega'z spread comparable to a wide panel.
const std::vector<double> kSuiteBandwidths{3.25, 3.9, 4.55, 5.2, 5.85, 6.5};

Matrix gaussian(Stream& rng, Index rows, Index cols) {
  Matrix A(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) A(i, j) = rng.normal();
  }
  return A;
}

// Unscaled managed factors of a P-feature draw over T synthetic months.
Matrix rff_factors(std::uint64_t seed, int T, int P) {
  PlantedKernelSpec spec;
  spec.k_true = 3;
  spec.support_space.P = 30;
  spec.support_space.D = kCharacteristics;
  spec.support_space.seed = derive_seed(seed, 1);
  spec.support_space.bandwidth_grid = kSuiteBandwidths;
  spec.seed = derive_seed(seed, 2);
  spec.noise_vol = 0.5;
  const auto synth = synth_panel(spec, std::max(T, 3), kAssets, kCharacteristics);
  FeatureSpec fs;
  fs.P = P;
  fs.D = kCharacteristics;
  fs.seed = derive_seed(seed, 3);
  fs.bandwidth_grid = kSuiteBandwidths;
  return unscaled_factor_panel(synth.panel, draw_features(fs)).topRows(T);
}

bool full_row_rank(const Matrix& F, double tol) {
  Eigen::ColPivHouseholderQR<Matrix> qr(F.transpose());
  qr.setThreshold(tol);
  return qr.rank() == F.rows();
}

// Per-instance outcome; combined into a PropertyResult in index order.
struct Outcome {
  bool ran = true;
  bool ok = true;
  double violation = 0.0;
  std::string note;
};

PropertyResult combine(const std::string& name, double tol, std::uint64_t seed, int property,
                       const std::vector<Outcome>& outcomes) {
  PropertyResult r;
  r.name = name;
  r.tolerance = tol;
  int skipped = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const Outcome& o = outcomes[i];
    if (!o.ran) {
      ++skipped;
      continue;
    }
    ++r.instances;
    r.worst = std::max(r.worst, o.violation);
    if (!o.ok) {
      ++r.failures;
      if (!r.failing_seed) {
        r.failing_seed = instance_seed(seed, property, static_cast<int>(i));
        r.note = o.note;
      }
    }
  }
  if (skipped > 0 && r.note.empty()) r.note = std::to_string(skipped) + " rank-deficient instances skipped";
  r.passed = r.failures == 0 && r.instances > 0;
  return r;
}

std::vector<Outcome> run_instances(int n, int threads, const std::function<Outcome(int)>& fn) {
  std::vector<Outcome> out(static_cast<std::size_t>(n));
  detail::parallel_for(out.size(), threads, [&](std::size_t i) {
    try {
      out[i] = fn(static_cast<int>(i));
    } catch (const Error& e) {
      out[i].ok = false;
      out[i].violation = std::numeric_limits<double>::infinity();
      out[i].note = e.what();
    }
  });
  return out;
}

// T and P for support-bound instance i: T cycles through the grid, P spans (T, max_ratio T].
std::pair<int, int> support_shape(const VerifyConfig& c, int i) {
  const int T = c.support_T[static_cast<std::size_t>(i) % c.support_T.size()];
  Stream rng(instance_seed(c.seed, kSupport, i) ^ 0x5EEDULL);
  const int P = T + 1 + static_cast<int>(rng.index(static_cast<std::uint64_t>((c.max_ratio - 1) * T)));
  return {T, P};
}

}  // namespace

void VerifyConfig::validate() const {
  if (support_instances < 1 || limit_instances < 1 || gap_instances < 1 || monotone_seeds < 1 ||
      scale_instances < 1 || feasible_directions < 1 || feasible_instances < 1) {
    throw ValidationError("verify instance counts must be >= 1");
  }
  if (support_T.empty()) throw ValidationError("verify support_T must not be empty");
  for (int T : support_T) {
    if (T < 2) throw ValidationError("verify support_T entries must be >= 2");
  }
  if (max_ratio < 2) throw ValidationError("verify max_ratio must be >= 2");
  if (table_T < 2 || table_D < 1) throw ValidationError("verify table_T must be >= 2 and table_D >= 1");
  if (fault != "none" && fault != "zero_kernel_move") throw ValidationError("unknown fault mode '" + fault + "'");
  if (threads < 1) throw ValidationError("verify threads must be >= 1");
}

std::uint64_t instance_seed(std::uint64_t seed, int property, int i) {
  return derive_seed(seed, static_cast<std::uint64_t>(property), static_cast<std::uint64_t>(i));
}

Matrix suite_instance(std::uint64_t seed, int T, int P) {
  if (seed % 2 == 0) {
    Stream rng(seed);
    return gaussian(rng, T, P);
  }
  return std::sqrt(2.0 / P) * rff_factors(seed, T, P);
}

TheoryReport run_theory_suite(const VerifyConfig& c) {
  c.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const SolverOptions& opt = c.solver;
  TheoryReport rep;
  rep.seed = c.seed;
  rep.fault = c.fault;

  // Support bound and interpolation share one instance set.
  std::vector<Outcome> interp(static_cast<std::size_t>(c.support_instances));
  const auto support = run_instances(c.support_instances, c.threads, [&](int i) {
    const auto [T, P] = support_shape(c, i);
    const Matrix F = suite_instance(instance_seed(c.seed, kSupport, i), T, P);
    const auto bp = basis_pursuit(F, opt);
    Outcome o;
    o.violation = std::max(0.0, static_cast<double>(bp.support.size()) - T);
    o.ok = static_cast<int>(bp.support.size()) <= T;
    if (!o.ok) o.note = "support " + std::to_string(bp.support.size()) + " > T=" + std::to_string(T);
    Outcome& in = interp[static_cast<std::size_t>(i)];
    if (!full_row_rank(F, opt.rank_tol)) {
      in.ran = false;
    } else {
      const auto rl = ridgeless(F, opt);
      in.violation = std::max(bp.residual_inf, rl.residual_inf);
      in.ok = in.violation <= 1e-8;
      if (!in.ok) in.note = "residual " + std::to_string(in.violation);
    }
    return o;
  });
  rep.properties.push_back(combine("support_bound", 0.0, c.seed, kSupport, support));
  rep.properties.push_back(combine("interpolation", 1e-8, c.seed, kSupport, interp));

  rep.properties.push_back(combine("penalized_limits", 1e-4, c.seed, kLimits,
                                   run_instances(c.limit_instances, c.threads, [&](int i) {
                                     const Matrix F = suite_instance(instance_seed(c.seed, kLimits, i), 6, 18);
                                     const auto rl = ridgeless(F, opt);
                                     const auto rg = ridge(F, 1e-10, opt);
                                     const auto bp = basis_pursuit(F, opt);
                                     const auto l1 = l1_path(F, 1e-9, opt);
                                     Outcome o;
                                     const double ridge_gap = (rg.lambda - rl.lambda).norm() / rl.lambda.norm();
                                     const double l1_gap = std::abs(l1.l1_norm - bp.l1_norm);
                                     o.violation = std::max(ridge_gap, l1_gap);
                                     o.ok = ridge_gap <= 1e-4 && l1_gap <= 1e-4;
                                     if (!o.ok) o.note = "ridge gap " + std::to_string(ridge_gap) + ", l1 gap " + std::to_string(l1_gap);
                                     return o;
                                   })));

  const bool zero_move = c.fault == "zero_kernel_move";
  rep.properties.push_back(combine("mean_gap_identity", 1e-10, c.seed, kGapIdentity,
                                   run_instances(c.gap_instances, c.threads, [&](int i) {
                                     const std::uint64_t s = instance_seed(c.seed, kGapIdentity, i);
                                     const int T = 3 + i % 6;
                                     const Matrix F = suite_instance(s, T, 3 * T);
                                     Stream rng(s ^ 0x3EA1ULL);
                                     // every fourth instance puts mu in the row space of F
                                     const Vector mu = i % 4 == 0 ? Vector(F.transpose() * gaussian(rng, T, 1))
                                                                  : Vector(gaussian(rng, 3 * T, 1));
                                     const auto bp = basis_pursuit(F, opt);
                                     const auto rl = ridgeless(F, opt);
                                     GapReport g = mean_gap(F, mu, bp, rl);
                                     if (zero_move) g.gap_identity = 0.0;
                                     Outcome o;
                                     o.violation = std::abs(g.gap_direct - g.gap_identity) / std::max(1.0, std::abs(g.gap_direct));
                                     o.ok = o.violation <= 1e-10;
                                     if (!o.ok) {
                                       o.note = "gap_direct " + std::to_string(g.gap_direct) + " vs identity " +
                                                std::to_string(g.gap_identity);
                                     }
                                     return o;
                                   })));

  // Common scaling across levels: the feasible set only grows with P.
  rep.properties.push_back(combine("vp_monotone", 1e-9, c.seed, kMonotone,
                                   run_instances(c.monotone_seeds, c.threads, [&](int i) {
                                     const int T = 10;
                                     const Matrix U = rff_factors(instance_seed(c.seed, kMonotone, i) | 1ULL, T, 16 * T);
                                     Outcome o;
                                     double prev = std::numeric_limits<double>::infinity();
                                     for (int m : {2, 4, 8, 16}) {
                                       const double v = basis_pursuit(U.leftCols(m * T), opt).l1_norm;
                                       if (std::isfinite(prev)) {
                                         const double excess = (v - prev) / std::max(1.0, prev);
                                         o.violation = std::max(o.violation, excess);
                                         if (excess > 1e-9) {
                                           o.ok = false;
                                           o.note = "v_P rose at P=" + std::to_string(m * T);
                                         }
                                       }
                                       prev = v;
                                     }
                                     return o;
                                   })));

  rep.properties.push_back(combine("scale_chain", 1e-10, c.seed, kScaleChain,
                                   run_instances(c.scale_instances, c.threads, [&](int i) {
                                     const std::uint64_t s = instance_seed(c.seed, kScaleChain, i);
                                     const Matrix F = suite_instance(s, 5, 20);
                                     const auto bp = basis_pursuit(F, opt);
                                     Stream rng(s ^ 0x5CA1EULL);
                                     const Matrix X = gaussian(rng, 40, 20);
                                     const Matrix C = X.rowwise() - X.colwise().mean();
                                     const Matrix Sigma = (C.transpose() * C) / 39.0;
                                     const ScaleChain sc = scale_chain(bp, Sigma);
                                     Outcome o;
                                     o.violation = std::max({0.0, bp.l2_norm - bp.l1_norm, sc.vol - sc.bound});
                                     o.ok = o.violation <= 1e-10;
                                     return o;
                                   })));

  rep.properties.push_back(combine("feasible_set", 1e-8, c.seed, kFeasibleSet,
                                   run_instances(c.feasible_instances, c.threads, [&](int i) {
                                     const std::uint64_t s = instance_seed(c.seed, kFeasibleSet, i);
                                     const Matrix F = suite_instance(s, 6, 30);
                                     const auto rl = ridgeless(F, opt);
                                     const RowSpaceProjector proj(F, opt.rank_tol);
                                     Stream rng(s ^ 0xFEA5ULL);
                                     const Vector mu_par = proj.project(gaussian(rng, 30, 1));
                                     Outcome o;
                                     for (int k = 0; k < c.feasible_directions; ++k) {
                                       const Vector h = proj.kernel_component(gaussian(rng, 30, 1));
                                       const Vector lambda = rl.lambda + h;
                                       const double resid = (F * lambda - Vector::Ones(6)).cwiseAbs().maxCoeff();
                                       const double scale = std::max(1.0, mu_par.norm() * h.norm());
                                       const double ortho = std::abs(mu_par.dot(h)) / scale;
                                       o.violation = std::max({o.violation, resid, ortho});
                                       if (resid > 1e-8 || ortho > 1e-8) {
                                         o.ok = false;
                                         o.note = "direction " + std::to_string(k) + " left the feasible set";
                                       }
                                     }
                                     return o;
                                   })));

  // Per-P table along one nested draw whose planted signal sits in late features.
  {
    const int T = c.table_T;
    const int P_max = 16 * T;
    FeatureSpec fs;
    fs.P = P_max;
    fs.D = c.table_D;
    fs.seed = instance_seed(c.seed, kTable, 0);
    fs.bandwidth_grid = kSuiteBandwidths;
    PlantedKernelSpec spec;
    spec.k_true = std::min(5, T);
    spec.support_space = fs;
    spec.seed = instance_seed(c.seed, kTable, 1);
    spec.noise_vol = 0.1;
    for (int k = 0; k < spec.k_true; ++k) spec.support.push_back(P_max - 1 - k * (P_max / 4 - 1) / spec.k_true);
    const auto synth = synth_panel(spec, T, 2 * kAssets, c.table_D);
    const FeatureDraw draw = draw_features(fs);
    const Matrix U = unscaled_factor_panel(synth.panel, draw);
    std::vector<Matrix> nested;
    for (int m : {2, 4, 8, 16}) nested.push_back(nested_level(U, m * T));
    rep.gap_table = complexity_gap_bound(nested, PlantedMeanOracle(synth, draw, 0, synth.panel.size()), opt);
  }

  rep.all_passed = std::all_of(rep.properties.begin(), rep.properties.end(),
                               [](const PropertyResult& p) { return p.passed; });
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

nlohmann::json to_json(const PropertyResult& r) {
  nlohmann::json j{{"name", r.name},         {"passed", r.passed}, {"instances", r.instances},
                   {"failures", r.failures}, {"worst", r.worst},   {"tolerance", r.tolerance}};
  if (r.failing_seed) j["failing_seed"] = *r.failing_seed;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

nlohmann::json to_json(const TheoryReport& r) {
  nlohmann::json props = nlohmann::json::array();
  for (const auto& p : r.properties) props.push_back(to_json(p));
  return {{"seed", r.seed},
          {"fault", r.fault},
          {"all_passed", r.all_passed},
          {"properties", props},
          {"gap_table", to_json(r.gap_table)},
          {"seconds", r.seconds}};
}

nlohmann::json to_json(const VerifyConfig& c) {
  return {{"seed", c.seed},
          {"support_instances", c.support_instances},
          {"support_T", c.support_T},
          {"max_ratio", c.max_ratio},
          {"limit_instances", c.limit_instances},
          {"gap_instances", c.gap_instances},
          {"monotone_seeds", c.monotone_seeds},
          {"scale_instances", c.scale_instances},
          {"feasible_instances", c.feasible_instances},
          {"feasible_directions", c.feasible_directions},
          {"table_T", c.table_T},
          {"table_D", c.table_D},
          {"fault", c.fault},
          {"solver", to_json(c.solver)}};
}

}  // namespace sparsesdf
