#include "sparsesdf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sparsesdf/error.hpp"

namespace sparsesdf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_finite(const Vector& v, const char* what) {
  if (!v.allFinite()) throw ValidationError(std::string(what) + ": non-finite input");
}

std::vector<double> sorted_copy(const Vector& r) {
  std::vector<double> s(r.data(), r.data() + r.size());
  std::sort(s.begin(), s.end());
  return s;
}

double order_statistic(const std::vector<double>& sorted, double q) {
  const auto n = static_cast<double>(sorted.size());
  auto k = static_cast<std::size_t>(std::ceil(q * n));
  k = std::clamp<std::size_t>(k, 1, sorted.size());
  return sorted[k - 1];
}

void check_q(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("quantile level " + std::to_string(q) + " outside (0, 1)");
}

// log(mean(exp(x))) without overflow.
double log_mean_exp(const Vector& x) {
  const double m = x.maxCoeff();
  return m + std::log((x.array() - m).exp().sum() / static_cast<double>(x.size()));
}

}  // namespace

SharpeStats sharpe(const Vector& r) {
  if (r.size() < 2) throw ValidationError("sharpe: need at least 2 observations");
  require_finite(r, "sharpe");
  SharpeStats s;
  s.mean = r.mean();
  if (r.maxCoeff() == r.minCoeff()) {
    s.mean = r(0);
    s.undefined = true;
    return s;
  }
  s.vol = std::sqrt((r.array() - s.mean).square().sum() / static_cast<double>(r.size() - 1));
  s.sharpe = s.mean / s.vol;
  return s;
}

double hj_distance(const Vector& M_hat, const Matrix& F_oos) {
  if (M_hat.size() != F_oos.rows()) throw ValidationError("hj_distance: M_hat and F_oos lengths differ");
  if (M_hat.size() == 0 || F_oos.cols() == 0) throw ValidationError("hj_distance: empty input");
  require_finite(M_hat, "hj_distance");
  if (!F_oos.allFinite()) throw ValidationError("hj_distance: non-finite input");
  const double n = static_cast<double>(F_oos.rows());
  const Vector g = F_oos.transpose() * M_hat / n;
  // E[FF'] = V diag(s^2 / n) V' from the thin SVD of F.
  Eigen::BDCSVD<Matrix> svd(F_oos, Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0.0;
  const double top = s(0) * s(0) / n;
  const Vector proj = svd.matrixV().transpose() * g;
  double out = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    const double eig = s(i) * s(i) / n;
    if (eig <= 1e-10 * top) continue;
    out += proj(i) * proj(i) / eig;
  }
  return std::max(out, 0.0);
}

TailCurves tail_curves(const Vector& r, const std::vector<double>& q_grid) {
  if (r.size() < 5) throw ValidationError("tail_curves: need at least 5 observations");
  require_finite(r, "tail_curves");
  const auto sorted = sorted_copy(r);
  TailCurves out;
  for (double q : q_grid) {
    check_q(q);
    const double Q = order_statistic(sorted, q);
    double sum = 0.0;
    std::size_t count = 0;
    for (double v : sorted) {
      if (q <= 0.5 ? v <= Q : v >= Q) {
        sum += v;
        ++count;
      }
    }
    if (count == 0) throw InternalError("tail_curves: empty tail set");
    out.q.push_back(q);
    out.quantile.push_back(Q);
    out.es.push_back(q <= 0.5 ? sum / static_cast<double>(count) : kNaN);
    out.utm.push_back(q > 0.5 ? sum / static_cast<double>(count) : kNaN);
  }
  return out;
}

double certainty_equivalent(const Vector& r, double gamma, const std::vector<int>& months) {
  if (r.size() == 0) throw ValidationError("certainty_equivalent: empty series");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("certainty_equivalent: gamma must be >= 0");
  if (!months.empty() && months.size() != static_cast<std::size_t>(r.size())) {
    throw ValidationError("certainty_equivalent: months and returns lengths differ");
  }
  require_finite(r, "certainty_equivalent");
  Vector log_gross(r.size());
  for (Index i = 0; i < r.size(); ++i) {
    if (!(1.0 + r(i) > 0.0)) {
      const std::string where = months.empty() ? "observation " + std::to_string(i) : "month " + std::to_string(months[i]);
      throw DomainError("certainty_equivalent: gross return " + std::to_string(1.0 + r(i)) + " <= 0 at " + where);
    }
    log_gross(i) = std::log1p(r(i));
  }
  double log_ce;
  if (gamma == 1.0) {
    log_ce = log_gross.mean();
  } else {
    const double e = 1.0 - gamma;
    log_ce = log_mean_exp(e * log_gross) / e;
  }
  return std::expm1(log_ce);
}

DominanceSummary dominance_summary(const Vector& a, const std::vector<int>& a_months, const Vector& b,
                                   const std::vector<int>& b_months, const std::vector<double>& q_grid) {
  if (a.size() != b.size() || a_months != b_months || a_months.size() != static_cast<std::size_t>(a.size())) {
    throw ValidationError("dominance_summary: series are not aligned month by month");
  }
  if (a.size() == 0) throw ValidationError("dominance_summary: empty series");
  if (q_grid.empty()) throw ValidationError("dominance_summary: empty quantile grid");
  DominanceSummary d;
  d.n_obs = static_cast<std::size_t>(a.size());
  d.pathwise_rate = static_cast<double>((a.array() > b.array()).count()) / static_cast<double>(a.size());
  const auto sa = sorted_copy(a);
  const auto sb = sorted_copy(b);
  std::size_t wins = 0;
  for (double q : q_grid) {
    check_q(q);
    if (order_statistic(sa, q) >= order_statistic(sb, q)) ++wins;
  }
  d.quantile_rate = static_cast<double>(wins) / static_cast<double>(q_grid.size());
  return d;
}

void MetricGrids::validate() const {
  for (double q : q_grid) check_q(q);
  if (!std::is_sorted(q_grid.begin(), q_grid.end())) throw ValidationError("metric q_grid must be increasing");
  for (double g : gammas) {
    if (!(g >= 0.0)) throw ValidationError("metric gammas must be >= 0");
  }
}

MetricsReport compute_metrics(const Vector& returns, const std::vector<int>& months, const Matrix& F_oos,
                              const MetricGrids& grids) {
  grids.validate();
  MetricsReport rep;
  rep.n_obs = static_cast<std::size_t>(returns.size());
  const SharpeStats s = sharpe(returns);
  rep.mean = s.mean;
  rep.vol = s.vol;
  rep.sharpe = s.sharpe;
  rep.sharpe_undefined = s.undefined;
  rep.hjd = F_oos.cols() == 0 ? kNaN : hj_distance(Vector::Ones(returns.size()) - returns, F_oos);
  rep.tails = tail_curves(returns, grids.q_grid);
  rep.gammas = grids.gammas;
  for (double g : grids.gammas) {
    try {
      rep.ce.push_back(certainty_equivalent(returns, g, months));
    } catch (const DomainError& e) {
      rep.ce.push_back(kNaN);
      if (rep.ce_note.empty()) rep.ce_note = e.what();
    }
  }
  return rep;
}

namespace {

nlohmann::json nullable(const std::vector<double>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json());
  return out;
}

nlohmann::json nullable(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
  nlohmann::json j{{"n_obs", r.n_obs},
                   {"mean", r.mean},
                   {"vol", r.vol},
                   {"sharpe", r.sharpe},
                   {"sharpe_undefined", r.sharpe_undefined},
                   {"hjd", nullable(r.hjd)},
                   {"q_grid", r.tails.q},
                   {"var", nullable(r.tails.quantile)},
                   {"es", nullable(r.tails.es)},
                   {"utm", nullable(r.tails.utm)},
                   {"gammas", r.gammas},
                   {"ce", nullable(r.ce)}};
  if (!r.ce_note.empty()) j["ce_note"] = r.ce_note;
  return j;
}

}  // namespace sparsesdf
