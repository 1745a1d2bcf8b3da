#include "sparsesdf/backtest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <set>
#include <string>

#include "sparsesdf/error.hpp"
#include "sparsesdf/factors.hpp"
#include "sparsesdf/features.hpp"
#include "parallel.hpp"

#ifndef SPARSESDF_VERSION
#define SPARSESDF_VERSION "unknown"
#endif

namespace sparsesdf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

using detail::parallel_for;

std::string fmt(double x) {
  if (!std::isfinite(x)) return "";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

nlohmann::json nullable(double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(); }

// Mean over finite entries; NaN if there are none.
double finite_mean(const std::vector<double>& v) {
  double sum = 0.0;
  int n = 0;
  for (double x : v) {
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  }
  return n ? sum / n : kNaN;
}

SdfSolution solve(const Matrix& F, Method method, const SweepConfig& cfg) {
  const bool low_c = F.cols() < F.rows();
  if (method == Method::BasisPursuit) {
    return low_c ? l1_path(F, cfg.low_c_alpha, cfg.solver) : basis_pursuit(F, cfg.solver);
  }
  return ridgeless(F, cfg.solver);
}

Method solver_for(Method method, int P, int T) {
  if (P >= T) return method;
  return method == Method::BasisPursuit ? Method::L1 : Method::Ridge;
}

MetricsReport average_reports(const std::vector<const MetricsReport*>& reps, const MetricGrids& grids) {
  MetricsReport out;
  out.tails.q = grids.q_grid;
  out.gammas = grids.gammas;
  if (reps.empty()) {
    out.mean = out.vol = out.sharpe = out.hjd = kNaN;
    out.tails.quantile.assign(grids.q_grid.size(), kNaN);
    out.tails.es.assign(grids.q_grid.size(), kNaN);
    out.tails.utm.assign(grids.q_grid.size(), kNaN);
    out.ce.assign(grids.gammas.size(), kNaN);
    return out;
  }
  auto field = [&](auto get) {
    std::vector<double> v;
    for (const MetricsReport* r : reps) v.push_back(get(*r));
    return finite_mean(v);
  };
  out.n_obs = reps.front()->n_obs;
  out.mean = field([](const MetricsReport& r) { return r.mean; });
  out.vol = field([](const MetricsReport& r) { return r.vol; });
  out.sharpe = field([](const MetricsReport& r) { return r.sharpe; });
  out.hjd = field([](const MetricsReport& r) { return r.hjd; });
  for (const MetricsReport* r : reps) out.sharpe_undefined = out.sharpe_undefined || r->sharpe_undefined;
  for (std::size_t i = 0; i < grids.q_grid.size(); ++i) {
    out.tails.quantile.push_back(field([i](const MetricsReport& r) { return r.tails.quantile[i]; }));
    out.tails.es.push_back(field([i](const MetricsReport& r) { return r.tails.es[i]; }));
    out.tails.utm.push_back(field([i](const MetricsReport& r) { return r.tails.utm[i]; }));
  }
  for (std::size_t i = 0; i < grids.gammas.size(); ++i) {
    out.ce.push_back(field([i](const MetricsReport& r) { return r.ce[i]; }));
  }
  for (const MetricsReport* r : reps) {
    if (!r->ce_note.empty()) {
      out.ce_note = r->ce_note;
      break;
    }
  }
  return out;
}

}  // namespace

void SweepConfig::validate() const {
  if (T < 2) throw ValidationError("sweep: T must be >= 2");
  if (c_grid.empty()) throw ValidationError("sweep: c_grid is empty");
  for (std::size_t i = 0; i < c_grid.size(); ++i) {
    if (!(c_grid[i] > 0.0) || !std::isfinite(c_grid[i])) throw ValidationError("sweep: c_grid values must be positive");
    if (i > 0 && !(c_grid[i] > c_grid[i - 1])) throw ValidationError("sweep: c_grid must be strictly increasing");
    if (level(c_grid[i], T) < 1) throw ValidationError("sweep: c = " + format_c(c_grid[i]) + " gives P < 1");
  }
  if (n_draws < 1) throw ValidationError("sweep: n_draws must be >= 1");
  if (methods.empty()) throw ValidationError("sweep: no methods selected");
  std::set<Method> seen;
  for (Method m : methods) {
    if (m != Method::BasisPursuit && m != Method::Ridgeless) {
      throw ValidationError("sweep: method '" + to_string(m) + "' is not a sweep method (use bp or ridgeless)");
    }
    if (!seen.insert(m).second) throw ValidationError("sweep: duplicate method " + to_string(m));
  }
  if (!is_valid_month(oos_start) || !is_valid_month(oos_end) || oos_end < oos_start) {
    throw ValidationError("sweep: invalid out-of-sample month range");
  }
  if (bandwidth_grid.empty()) throw ValidationError("sweep: bandwidth_grid is empty");
  for (double b : bandwidth_grid) {
    if (!(b > 0.0)) throw ValidationError("sweep: bandwidths must be positive");
  }
  if (!(low_c_alpha > 0.0)) throw ValidationError("sweep: low_c_alpha must be positive");
  if (threads < 1) throw ValidationError("sweep: threads must be >= 1");
  metrics.validate();
}

int SweepConfig::level(double c, int T) { return static_cast<int>(std::nearbyint(c * static_cast<double>(T))); }

std::vector<int> SweepConfig::levels() const {
  std::vector<int> out;
  for (double c : c_grid) out.push_back(level(c, T));
  return out;
}

Vector SeriesResult::returns() const {
  Vector r(static_cast<Index>(windows.size()));
  for (std::size_t i = 0; i < windows.size(); ++i) r(static_cast<Index>(i)) = windows[i].ret;
  return r;
}

const SeriesResult& SweepResult::at(std::size_t c_index, int draw, std::size_t method_index) const {
  const std::size_t nm = config.methods.size();
  const std::size_t idx = (c_index * static_cast<std::size_t>(config.n_draws) + static_cast<std::size_t>(draw)) * nm + method_index;
  if (idx >= series.size()) throw ValidationError("sweep result: cell index out of range");
  return series[idx];
}

SweepResult run_sweep(const CharacteristicPanel& panel, const SweepConfig& config) {
  config.validate();
  const auto t_total = Clock::now();
  SweepResult res;
  res.config = config;
  const int T = config.T;

  // Evaluation month tau uses characteristics of prev(tau) and a window of the
  // T slices before it, whose returns are realized by prev(tau).
  std::vector<int> missing;
  {
    int m = config.oos_start;
    for (int k = 0; k <= T; ++k) m = prev_month(m);
    for (; m < config.oos_end; m = next_month(m)) {
      if (!panel.find(m)) missing.push_back(m);
    }
  }
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 24; ++i) list += (i ? ", " : "") + std::to_string(missing[i]);
    if (missing.size() > 24) list += ", ... (" + std::to_string(missing.size()) + " in total)";
    throw ValidationError("panel does not cover the out-of-sample range " + std::to_string(config.oos_start) + "-" +
                          std::to_string(config.oos_end) + " with T = " + std::to_string(T) +
                          "; missing months: " + list);
  }
  for (int tau = config.oos_start; tau <= config.oos_end; tau = next_month(tau)) {
    res.oos_months.push_back(tau);
    res.oos_slices.push_back(*panel.find(prev_month(tau)));
  }
  const std::size_t first_slice = res.oos_slices.front() - static_cast<std::size_t>(T);
  const std::size_t last_slice = res.oos_slices.back();
  const std::size_t n_windows = res.oos_months.size();

  const std::vector<int> levels = config.levels();
  const int P_max = *std::max_element(levels.begin(), levels.end());
  const std::size_t nc = config.c_grid.size();
  const std::size_t nm = config.methods.size();
  const auto nd = static_cast<std::size_t>(config.n_draws);

  res.series.resize(nc * nd * nm);
  for (std::size_t ci = 0; ci < nc; ++ci) {
    for (std::size_t d = 0; d < nd; ++d) {
      for (std::size_t mi = 0; mi < nm; ++mi) {
        SeriesResult& s = res.series[(ci * nd + d) * nm + mi];
        s.c_index = static_cast<int>(ci);
        s.draw = static_cast<int>(d);
        s.method = config.methods[mi];
        s.solver_used = solver_for(s.method, levels[ci], T);
        s.windows.resize(n_windows);
        // Slots for the first and last window; unset slots keep an empty lambda.
        s.spot_checks.resize(n_windows == 1 ? 1 : 2);
      }
    }
  }

  for (std::size_t d = 0; d < nd; ++d) {
    FeatureSpec spec;
    spec.P = P_max;
    spec.D = panel.D();
    spec.bandwidth_grid = config.bandwidth_grid;
    spec.seed = config.seed;
    spec.draw_index = static_cast<int>(d);
    const FeatureDraw draw = draw_features(spec);

    // Unscaled factors at P_max for the slices in use; every level is a
    // rescaled column prefix of this matrix.
    Matrix U(static_cast<Index>(last_slice - first_slice + 1), P_max);
    parallel_for(last_slice - first_slice + 1, config.threads, [&](std::size_t k) {
      const MonthSlice& m = panel[first_slice + k];
      U.row(static_cast<Index>(k)) = managed_factor(expand_unscaled(draw, m.Z), m.R_next).transpose();
    });
    if (!U.allFinite()) throw ValidationError("sweep: non-finite factor values");

    std::vector<double> task_seconds(nc * n_windows * nm, 0.0);
    parallel_for(nc * n_windows, config.threads, [&](std::size_t task) {
      const std::size_t ci = task / n_windows;
      const std::size_t w = task % n_windows;
      const int P = levels[ci];
      const double scale = std::sqrt(2.0 / static_cast<double>(P));
      const Index row0 = static_cast<Index>(res.oos_slices[w] - static_cast<std::size_t>(T) - first_slice);
      const Matrix F = scale * U.block(row0, 0, T, P);
      const Vector f_next = scale * U.row(row0 + T).head(P).transpose();
      for (std::size_t mi = 0; mi < nm; ++mi) {
        SeriesResult& s = res.series[(ci * nd + d) * nm + mi];
        WindowRecord& rec = s.windows[w];
        const auto t0 = Clock::now();
        try {
          SdfSolution sol = solve(F, config.methods[mi], config);
          rec.ret = sol.lambda.dot(f_next);
          rec.support_size = static_cast<int>(sol.support.size());
          rec.iterations = sol.diagnostics.iterations;
          rec.residual_inf = sol.residual_inf;
          if (!std::isfinite(rec.ret)) throw InternalError("non-finite out-of-sample return");
          if (w == 0 || w + 1 == n_windows) s.spot_checks[w == 0 ? 0 : 1] = {w, std::move(sol)};
        } catch (const Error& e) {
          rec.ret = kNaN;
          rec.support_size = -1;
          rec.error = e.what();
        }
        task_seconds[(ci * n_windows + w) * nm + mi] = seconds_since(t0);
      }
    });

    // Metrics for this draw while its factor panel is in memory.
    for (std::size_t ci = 0; ci < nc; ++ci) {
      const int P = levels[ci];
      const double scale = std::sqrt(2.0 / static_cast<double>(P));
      for (std::size_t mi = 0; mi < nm; ++mi) {
        SeriesResult& s = res.series[(ci * nd + d) * nm + mi];
        std::vector<Index> ok;
        for (std::size_t w = 0; w < n_windows; ++w) {
          s.seconds += task_seconds[(ci * n_windows + w) * nm + mi];
          if (std::isfinite(s.windows[w].ret)) ok.push_back(static_cast<Index>(w));
          else ++s.failed;
        }
        if (ok.size() < 5) continue;
        Vector r(static_cast<Index>(ok.size()));
        std::vector<int> months;
        Matrix F_oos(static_cast<Index>(ok.size()), P);
        for (std::size_t i = 0; i < ok.size(); ++i) {
          const auto w = static_cast<std::size_t>(ok[i]);
          r(static_cast<Index>(i)) = s.windows[w].ret;
          months.push_back(res.oos_months[w]);
          F_oos.row(static_cast<Index>(i)) =
              scale * U.row(static_cast<Index>(res.oos_slices[w] - first_slice)).head(P);
        }
        s.metrics = compute_metrics(r, months, F_oos, config.metrics);
        s.metrics_available = true;
      }
    }
  }

  for (std::size_t ci = 0; ci < nc; ++ci) {
    std::size_t failed = 0;
    for (std::size_t k = 0; k < nd * nm; ++k) failed += static_cast<std::size_t>(res.series[ci * nd * nm + k].failed);
    const std::size_t total = nd * nm * n_windows;
    if (2 * failed > total) {
      std::string first_error;
      for (std::size_t k = 0; k < nd * nm && first_error.empty(); ++k) {
        for (const WindowRecord& w : res.series[ci * nd * nm + k].windows) {
          if (!w.error.empty()) {
            first_error = w.error;
            break;
          }
        }
      }
      throw SweepError("sweep: " + std::to_string(failed) + " of " + std::to_string(total) + " cells failed at c = " +
                       format_c(config.c_grid[ci]) + " (first error: " + first_error + ")");
    }
    for (std::size_t mi = 0; mi < nm; ++mi) {
      MethodSummary sum;
      sum.c = config.c_grid[ci];
      sum.P = levels[ci];
      sum.method = config.methods[mi];
      sum.low_c_branch = levels[ci] < T;
      sum.total_windows = static_cast<int>(nd * n_windows);
      std::vector<const MetricsReport*> reps;
      for (std::size_t d = 0; d < nd; ++d) {
        const SeriesResult& s = res.series[(ci * nd + d) * nm + mi];
        sum.failed_windows += s.failed;
        if (s.metrics_available) reps.push_back(&s.metrics);
      }
      sum.draws_used = static_cast<int>(reps.size());
      sum.degraded = sum.failed_windows > 0 || sum.draws_used < config.n_draws;
      sum.averaged = average_reports(reps, config.metrics);
      res.summary.push_back(std::move(sum));
    }
  }
  res.seconds = seconds_since(t_total);
  return res;
}

std::vector<SupportStats> support_curve(const SweepResult& result) {
  const auto& methods = result.config.methods;
  const auto it = std::find(methods.begin(), methods.end(), Method::BasisPursuit);
  if (it == methods.end()) throw ValidationError("support_curve: result has no basis-pursuit cells");
  const auto mi = static_cast<std::size_t>(it - methods.begin());
  std::vector<SupportStats> out;
  for (std::size_t ci = 0; ci < result.config.c_grid.size(); ++ci) {
    SupportStats st;
    st.c = result.config.c_grid[ci];
    st.P = SweepConfig::level(st.c, result.config.T);
    std::vector<int> counts;
    for (int d = 0; d < result.config.n_draws; ++d) {
      for (const WindowRecord& w : result.at(ci, d, mi).windows) {
        if (w.support_size >= 0) counts.push_back(w.support_size);
      }
    }
    st.count = counts.size();
    if (!counts.empty()) {
      double sum = 0.0;
      for (int k : counts) sum += k;
      st.mean = sum / static_cast<double>(counts.size());
      double ss = 0.0;
      for (int k : counts) ss += (k - st.mean) * (k - st.mean);
      st.sd = counts.size() > 1 ? std::sqrt(ss / static_cast<double>(counts.size() - 1)) : 0.0;
      st.min = *std::min_element(counts.begin(), counts.end());
      st.max = *std::max_element(counts.begin(), counts.end());
    }
    out.push_back(st);
  }
  return out;
}

std::string format_c(double c) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, c);
  return std::string(buf, res.ptr);
}

nlohmann::json to_json(const SweepConfig& c) {
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.push_back(to_string(m));
  return {{"T", c.T},
          {"c_grid", c.c_grid},
          {"P_grid", c.levels()},
          {"n_draws", c.n_draws},
          {"methods", methods},
          {"oos_start", c.oos_start},
          {"oos_end", c.oos_end},
          {"seed", c.seed},
          {"bandwidth_grid", c.bandwidth_grid},
          {"low_c_alpha", c.low_c_alpha},
          {"solver", to_json(c.solver)},
          {"metrics", {{"q_grid", c.metrics.q_grid}, {"gammas", c.metrics.gammas}}}};
}

namespace {

void write_text(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << text;
  if (!out) throw ValidationError("write failed for " + file.string());
}

nlohmann::json summary_json(const SweepResult& r) {
  nlohmann::json cells = nlohmann::json::array();
  const std::size_t nm = r.config.methods.size();
  for (std::size_t k = 0; k < r.summary.size(); ++k) {
    const MethodSummary& s = r.summary[k];
    const std::size_t ci = k / nm;
    const std::size_t mi = k % nm;
    nlohmann::json per_draw = nlohmann::json::array();
    for (int d = 0; d < r.config.n_draws; ++d) {
      const SeriesResult& sr = r.at(ci, d, mi);
      per_draw.push_back({{"draw", d},
                          {"solver", to_string(sr.solver_used)},
                          {"failed_windows", sr.failed},
                          {"mean", sr.metrics_available ? nullable(sr.metrics.mean) : nlohmann::json()},
                          {"sharpe", sr.metrics_available ? nullable(sr.metrics.sharpe) : nlohmann::json()}});
    }
    cells.push_back({{"c", s.c},
                     {"P", s.P},
                     {"method", to_string(s.method)},
                     {"low_c_branch", s.low_c_branch},
                     {"draws_used", s.draws_used},
                     {"failed_windows", s.failed_windows},
                     {"total_windows", s.total_windows},
                     {"degraded", s.degraded},
                     {"metrics", to_json(s.averaged)},
                     {"per_draw", per_draw}});
  }
  nlohmann::json j{{"config", to_json(r.config)},
                   {"oos_months", {{"first", r.oos_months.front()}, {"last", r.oos_months.back()}, {"count", r.oos_months.size()}}},
                   {"cells", cells}};
  if (std::find(r.config.methods.begin(), r.config.methods.end(), Method::BasisPursuit) != r.config.methods.end()) {
    nlohmann::json sc = nlohmann::json::array();
    for (const SupportStats& st : support_curve(r)) {
      sc.push_back({{"c", st.c}, {"P", st.P}, {"mean", st.mean}, {"sd", st.sd}, {"min", st.min}, {"max", st.max}, {"count", st.count}});
    }
    j["support_curve"] = sc;
  }
  return j;
}

}  // namespace

void write_sweep(const SweepResult& r, const std::filesystem::path& dir, const nlohmann::json& extra_meta) {
  std::filesystem::create_directories(dir);
  write_text(dir / "summary.json", summary_json(r).dump(2) + "\n");

  const std::size_t nm = r.config.methods.size();
  for (std::size_t ci = 0; ci < r.config.c_grid.size(); ++ci) {
    for (std::size_t mi = 0; mi < nm; ++mi) {
      std::string text = "month,draw,ret\n";
      for (int d = 0; d < r.config.n_draws; ++d) {
        const SeriesResult& s = r.at(ci, d, mi);
        for (std::size_t w = 0; w < s.windows.size(); ++w) {
          text += std::to_string(r.oos_months[w]) + "," + std::to_string(d) + "," + fmt(s.windows[w].ret) + "\n";
        }
      }
      write_text(dir / ("returns_" + format_c(r.config.c_grid[ci]) + "_" + to_string(r.config.methods[mi]) + ".csv"), text);
    }
  }

  std::string supports = "c,P,method,draw,month,support_size\n";
  for (const SeriesResult& s : r.series) {
    const double c = r.config.c_grid[static_cast<std::size_t>(s.c_index)];
    for (std::size_t w = 0; w < s.windows.size(); ++w) {
      supports += format_c(c) + "," + std::to_string(SweepConfig::level(c, r.config.T)) + "," + to_string(s.method) + "," +
                  std::to_string(s.draw) + "," + std::to_string(r.oos_months[w]) + "," +
                  (s.windows[w].support_size >= 0 ? std::to_string(s.windows[w].support_size) : std::string()) + "\n";
    }
  }
  write_text(dir / "supports.csv", supports);

  nlohmann::json timing = nlohmann::json::array();
  nlohmann::json errors = nlohmann::json::array();
  for (const SeriesResult& s : r.series) {
    const double c = r.config.c_grid[static_cast<std::size_t>(s.c_index)];
    timing.push_back({{"c", c}, {"draw", s.draw}, {"method", to_string(s.method)}, {"seconds", s.seconds}});
    for (std::size_t w = 0; w < s.windows.size(); ++w) {
      if (!s.windows[w].error.empty()) {
        errors.push_back({{"c", c}, {"draw", s.draw}, {"method", to_string(s.method)}, {"month", r.oos_months[w]},
                          {"error", s.windows[w].error}});
      }
    }
  }
  nlohmann::json draws = nlohmann::json::array();
  const std::vector<int> levels = r.config.levels();
  for (int d = 0; d < r.config.n_draws; ++d) {
    draws.push_back({{"seed", r.config.seed},
                     {"draw_index", d},
                     {"P_max", *std::max_element(levels.begin(), levels.end())},
                     {"bandwidth_grid", r.config.bandwidth_grid}});
  }
  nlohmann::json meta{{"code_version", SPARSESDF_VERSION},
                      {"master_seed", r.config.seed},
                      {"feature_draws", draws},
                      {"tolerances", to_json(r.config.solver)},
                      {"threads", r.config.threads},
                      {"conventions",
                       {{"quantile", "k = ceil(qN) order statistic"},
                        {"draw_averaging", "metrics computed per draw, then averaged across draws"},
                        {"low_c_branch", "P < T: bp column is lasso with alpha = low_c_alpha; ridgeless column is min-norm least squares"},
                        {"failed_cells", "excluded from averages; counts reported per cell"},
                        {"units", "monthly, not annualized"}}},
                      {"seconds_total", r.seconds},
                      {"cell_seconds", timing},
                      {"cell_errors", errors}};
  for (const auto& [k, v] : extra_meta.items()) meta[k] = v;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

void write_curves_csv(const std::vector<MethodSummary>& summary, const MetricGrids& g, const std::filesystem::path& file) {
  std::string text = "c,P,method,mean,vol,sharpe,hjd";
  for (double q : g.q_grid) text += ",var_" + format_c(q);
  for (double q : g.q_grid) text += (q <= 0.5 ? ",es_" : ",utm_") + format_c(q);
  for (double gamma : g.gammas) text += ",ce_" + format_c(gamma);
  text += "\n";
  for (const MethodSummary& s : summary) {
    const MetricsReport& m = s.averaged;
    text += format_c(s.c) + "," + std::to_string(s.P) + "," + to_string(s.method) + "," + fmt(m.mean) + "," + fmt(m.vol) +
            "," + fmt(m.sharpe) + "," + fmt(m.hjd);
    for (double v : m.tails.quantile) text += "," + fmt(v);
    for (std::size_t i = 0; i < g.q_grid.size(); ++i) {
      text += "," + fmt(g.q_grid[i] <= 0.5 ? m.tails.es[i] : m.tails.utm[i]);
    }
    for (double v : m.ce) text += "," + fmt(v);
    text += "\n";
  }
  write_text(file, text);
}

void write_curves_csv(const SweepResult& r, const std::filesystem::path& file) {
  write_curves_csv(r.summary, r.config.metrics, file);
}

std::vector<MethodSummary> metrics_from_returns(const std::filesystem::path& run_dir, const SweepConfig& config) {
  const std::vector<int> levels = config.levels();
  std::vector<MethodSummary> out;
  for (std::size_t ci = 0; ci < config.c_grid.size(); ++ci) {
    for (Method method : config.methods) {
      const auto file = run_dir / ("returns_" + format_c(config.c_grid[ci]) + "_" + to_string(method) + ".csv");
      std::ifstream in(file);
      if (!in) throw ValidationError("missing returns file " + file.string());
      std::vector<std::vector<std::pair<int, double>>> by_draw(static_cast<std::size_t>(config.n_draws));
      std::string line;
      std::size_t line_no = 1;
      if (!std::getline(in, line) || line != "month,draw,ret") throw ParseError(1, file.string() + ": bad header");
      MethodSummary sum;
      sum.c = config.c_grid[ci];
      sum.P = levels[ci];
      sum.method = method;
      sum.low_c_branch = levels[ci] < config.T;
      while (std::getline(in, line)) {
        ++line_no;
        const auto a = line.find(',');
        const auto b = a == std::string::npos ? a : line.find(',', a + 1);
        if (b == std::string::npos) throw ParseError(line_no, file.string() + ": expected month,draw,ret");
        int month = 0;
        int draw = 0;
        try {
          month = std::stoi(line.substr(0, a));
          draw = std::stoi(line.substr(a + 1, b - a - 1));
        } catch (const std::exception&) {
          throw ParseError(line_no, file.string() + ": bad month or draw");
        }
        if (draw < 0 || draw >= config.n_draws) throw ParseError(line_no, file.string() + ": draw outside config range");
        ++sum.total_windows;
        const std::string ret = line.substr(b + 1);
        if (ret.empty()) {
          ++sum.failed_windows;
          continue;
        }
        double value = 0.0;
        const auto res = std::from_chars(ret.data(), ret.data() + ret.size(), value);
        if (res.ec != std::errc() || res.ptr != ret.data() + ret.size()) {
          throw ParseError(line_no, file.string() + ": bad return '" + ret + "'");
        }
        by_draw[static_cast<std::size_t>(draw)].emplace_back(month, value);
      }
      std::vector<MetricsReport> reports;
      for (const auto& rows : by_draw) {
        if (rows.size() < 5) continue;
        Vector r(static_cast<Index>(rows.size()));
        std::vector<int> months;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          months.push_back(rows[i].first);
          r(static_cast<Index>(i)) = rows[i].second;
        }
        reports.push_back(compute_metrics(r, months, Matrix(r.size(), 0), config.metrics));
      }
      std::vector<const MetricsReport*> ptrs;
      for (const auto& rep : reports) ptrs.push_back(&rep);
      sum.draws_used = static_cast<int>(ptrs.size());
      sum.degraded = sum.failed_windows > 0 || sum.draws_used < config.n_draws;
      sum.averaged = average_reports(ptrs, config.metrics);
      out.push_back(std::move(sum));
    }
  }
  return out;
}

}  // namespace sparsesdf
