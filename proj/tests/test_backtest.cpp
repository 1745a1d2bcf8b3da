#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "sparsesdf/backtest.hpp"
#include "sparsesdf/error.hpp"
#include "sparsesdf/factors.hpp"

using namespace sparsesdf;

namespace {

SyntheticPanel small_panel(int months, std::uint64_t seed = 5, int N = 25, int D = 3) {
  PlantedKernelSpec spec;
  spec.k_true = 2;
  spec.support_space.P = 30;
  spec.support_space.D = D;
  spec.noise_vol = 0.05;
  spec.seed = seed;
  return synth_panel(spec, months, N, D);
}

// Evaluation months are the realization months of slices [first, first + count).
SweepConfig small_config(const CharacteristicPanel& panel, int T, std::size_t first, std::size_t count) {
  SweepConfig cfg;
  cfg.T = T;
  cfg.c_grid = {0.5, 1.0, 3.0};
  cfg.n_draws = 2;
  cfg.seed = 17;
  cfg.oos_start = next_month(panel[first].month_id);
  cfg.oos_end = next_month(panel[first + count - 1].month_id);
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("banker's rounding of P") {
  CHECK(SweepConfig::level(0.5, 3) == 2);   // 1.5 -> 2
  CHECK(SweepConfig::level(0.5, 5) == 2);   // 2.5 -> 2
  CHECK(SweepConfig::level(0.1, 60) == 6);
  CHECK(SweepConfig::level(200.0, 60) == 12000);
}

TEST_CASE("sweep config validation") {
  const auto synth = small_panel(20);
  SweepConfig cfg = small_config(synth.panel, 5, 10, 5);
  CHECK_NOTHROW(cfg.validate());
  SweepConfig bad = cfg;
  bad.c_grid = {1.0, 1.0};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.c_grid = {0.01};  // P = 0
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.methods = {Method::Ridge};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = cfg;
  bad.T = 1;
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("single window matches a hand-composed solve and dot product") {
  const auto synth = small_panel(4);
  SweepConfig cfg;
  cfg.T = 3;
  cfg.c_grid = {3.0};  // P = 9
  cfg.n_draws = 1;
  cfg.seed = 23;
  cfg.oos_start = next_month(synth.panel[3].month_id);
  cfg.oos_end = cfg.oos_start;
  const auto res = run_sweep(synth.panel, cfg);
  REQUIRE(res.oos_months.size() == 1);

  FeatureSpec fs;
  fs.P = 9;
  fs.D = synth.panel.D();
  fs.seed = 23;
  const auto window = build_window(synth.panel, draw_features(fs), 0, 3);
  const double bp = basis_pursuit(window.F_in).lambda.dot(window.F_oos.front());
  const double rl = ridgeless(window.F_in).lambda.dot(window.F_oos.front());
  CHECK(std::abs(res.at(0, 0, 0).windows[0].ret - bp) <= 1e-12 * std::max(1.0, std::abs(bp)));
  CHECK(std::abs(res.at(0, 0, 1).windows[0].ret - rl) <= 1e-12 * std::max(1.0, std::abs(rl)));
  CHECK(res.oos_months.front() == window.oos_months.front());
}

TEST_CASE("stored solutions reproduce the out-of-sample returns") {
  const auto synth = small_panel(20);
  const auto cfg = small_config(synth.panel, 6, 8, 10);
  const auto res = run_sweep(synth.panel, cfg);
  const auto levels = cfg.levels();
  for (std::size_t ci = 0; ci < cfg.c_grid.size(); ++ci) {
    for (int d = 0; d < cfg.n_draws; ++d) {
      FeatureSpec fs;
      fs.P = levels[ci];
      fs.D = synth.panel.D();
      fs.seed = cfg.seed;
      fs.draw_index = d;
      const auto draw = draw_features(fs);
      for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
        const SeriesResult& s = res.at(ci, d, mi);
        for (const auto& [w, sol] : s.spot_checks) {
          REQUIRE(sol.lambda.size() == levels[ci]);
          const auto window = build_window(synth.panel, draw, res.oos_slices[w] - 6, 6);
          CHECK(std::abs(sol.lambda.dot(window.F_oos.front()) - s.windows[w].ret) <=
                1e-9 * std::max(1.0, std::abs(s.windows[w].ret)));
        }
      }
    }
  }
}

TEST_CASE("sweep is deterministic and independent of the thread count") {
  const auto synth = small_panel(20);
  auto cfg = small_config(synth.panel, 6, 8, 10);
  const auto a = run_sweep(synth.panel, cfg);
  cfg.threads = 3;
  const auto b = run_sweep(synth.panel, cfg);
  REQUIRE(a.series.size() == b.series.size());
  for (std::size_t k = 0; k < a.series.size(); ++k) {
    for (std::size_t w = 0; w < a.series[k].windows.size(); ++w) {
      CHECK(a.series[k].windows[w].ret == b.series[k].windows[w].ret);
      CHECK(a.series[k].windows[w].support_size == b.series[k].windows[w].support_size);
    }
  }
  const auto dir = std::filesystem::temp_directory_path() / "sparsesdf_test_backtest";
  std::filesystem::remove_all(dir);
  write_sweep(a, dir / "a");
  write_sweep(b, dir / "b");
  write_curves_csv(a, dir / "a" / "curves.csv");
  write_curves_csv(b, dir / "b" / "curves.csv");
  CHECK(slurp(dir / "a" / "summary.json") == slurp(dir / "b" / "summary.json"));
  CHECK(slurp(dir / "a" / "curves.csv") == slurp(dir / "b" / "curves.csv"));
  CHECK(slurp(dir / "a" / "supports.csv") == slurp(dir / "b" / "supports.csv"));
  CHECK(std::filesystem::exists(dir / "a" / "returns_0.5_bp.csv"));
  CHECK(std::filesystem::exists(dir / "a" / "meta.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("curves.csv has one row per c and method") {
  const auto synth = small_panel(20);
  const auto cfg = small_config(synth.panel, 6, 8, 10);
  const auto res = run_sweep(synth.panel, cfg);
  const auto file = std::filesystem::temp_directory_path() / "sparsesdf_curves_rows.csv";
  write_curves_csv(res, file);
  std::ifstream in(file);
  std::string line;
  int rows = -1;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == static_cast<int>(cfg.c_grid.size() * cfg.methods.size()));
  std::filesystem::remove(file);
}

TEST_CASE("low complexity runs the underparameterized branch") {
  const auto synth = small_panel(40, 6);
  SweepConfig cfg = small_config(synth.panel, 20, 25, 10);
  cfg.c_grid = {0.1};  // P = 2 < T
  const auto res = run_sweep(synth.panel, cfg);
  const SeriesResult& rl = res.at(0, 0, 1);
  CHECK(rl.solver_used == Method::Ridge);
  CHECK(res.at(0, 0, 0).solver_used == Method::L1);
  CHECK(res.summary[0].low_c_branch);
  for (const WindowRecord& w : rl.windows) CHECK(w.residual_inf > 1e-6);
}

TEST_CASE("estimates do not look ahead") {
  const auto synth = small_panel(20);
  const auto cfg = small_config(synth.panel, 6, 8, 10);
  const auto base = run_sweep(synth.panel, cfg);

  // Scramble returns realized after evaluation month index 4.
  const std::size_t cut = base.oos_slices[4];
  std::vector<MonthSlice> months = synth.panel.months();
  Stream rng(99);
  for (std::size_t k = cut + 1; k < months.size(); ++k) {
    for (Index i = 0; i < months[k].R_next.size(); ++i) months[k].R_next(i) = 10.0 * rng.normal();
  }
  const CharacteristicPanel altered(std::move(months), synth.panel.D());
  const auto moved = run_sweep(altered, cfg);
  for (std::size_t k = 0; k < base.series.size(); ++k) {
    for (std::size_t w = 0; w <= 4; ++w) CHECK(base.series[k].windows[w].ret == moved.series[k].windows[w].ret);
    CHECK(base.series[k].windows[5].ret != moved.series[k].windows[5].ret);
  }
}

TEST_CASE("draw averaging is the mean of per-draw metrics") {
  const auto synth = small_panel(20);
  auto cfg = small_config(synth.panel, 6, 8, 10);
  cfg.n_draws = 3;
  const auto res = run_sweep(synth.panel, cfg);
  for (std::size_t ci = 0; ci < cfg.c_grid.size(); ++ci) {
    for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
      double sum = 0.0;
      for (int d = 0; d < 3; ++d) {
        const Vector r = res.at(ci, d, mi).returns();
        sum += oracle::mean_two_pass(std::vector<double>(r.data(), r.data() + r.size()));
      }
      const MethodSummary& s = res.summary[ci * cfg.methods.size() + mi];
      CHECK(s.draws_used == 3);
      CHECK(std::abs(s.averaged.mean - sum / 3.0) <= 1e-12 * std::max(1.0, std::abs(s.averaged.mean)));
    }
  }
}

TEST_CASE("uncovered out-of-sample range names the missing months") {
  const auto synth = small_panel(12);
  SweepConfig cfg = small_config(synth.panel, 6, 8, 4);
  cfg.oos_end = next_month(next_month(cfg.oos_end));
  try {
    run_sweep(synth.panel, cfg);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const int last = synth.panel[synth.panel.size() - 1].month_id;
    CHECK(std::string(e.what()).find(std::to_string(next_month(last))) != std::string::npos);
  }
}

TEST_CASE("support curve respects the T ceiling") {
  const auto synth = small_panel(20);
  const auto cfg = small_config(synth.panel, 6, 8, 10);
  const auto res = run_sweep(synth.panel, cfg);
  for (const SupportStats& st : support_curve(res)) {
    CHECK(st.max <= 6);
    CHECK(st.count == 20);
  }
  auto rl_only = cfg;
  rl_only.methods = {Method::Ridgeless};
  CHECK_THROWS_AS(support_curve(run_sweep(synth.panel, rl_only)), ValidationError);
}

TEST_CASE("a stationary noiseless cross-section collapses the support to one feature") {
  // Every month repeats the same characteristics and returns, so each window's
  // factor matrix has rank one and basis pursuit needs a single coefficient.
  const auto base = small_panel(2, 8, 30, 2);
  FeatureSpec fs;
  fs.P = 5;
  fs.D = 2;
  fs.seed = 1;
  const Vector R = 0.3 * expand(draw_features(fs), base.panel[0].Z).col(2);
  std::vector<MonthSlice> months;
  int id = 200001;
  for (int k = 0; k < 14; ++k) {
    MonthSlice m = base.panel[0];
    m.month_id = id;
    m.R_next = R;
    months.push_back(m);
    id = next_month(id);
  }
  const CharacteristicPanel panel(std::move(months), 2);
  SweepConfig cfg = small_config(panel, 5, 8, 6);
  cfg.c_grid = {2.0, 8.0};
  const auto res = run_sweep(panel, cfg);
  for (const SupportStats& st : support_curve(res)) CHECK(st.max == 1);
}
