#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "sparsesdf/error.hpp"
#include "sparsesdf/metrics.hpp"

using namespace sparsesdf;

namespace {

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

std::vector<int> month_ids(Index n) {
  std::vector<int> m(n);
  int id = 200001;
  for (Index i = 0; i < n; ++i) {
    m[i] = id;
    id = id % 100 == 12 ? id + 89 : id + 1;
  }
  return m;
}

Vector random_returns(Stream& rng, Index n, double scale = 0.05) {
  Vector r(n);
  for (Index i = 0; i < n; ++i) r(i) = 0.005 + scale * rng.normal();
  return r;
}

}  // namespace

TEST_CASE("sharpe closed forms") {
  const auto s = sharpe(Vector{{0.01, 0.03}});
  CHECK(s.mean == doctest::Approx(0.02).epsilon(1e-15));
  CHECK(s.vol == doctest::Approx(std::sqrt(2.0) * 0.01).epsilon(1e-12));
  CHECK(s.sharpe == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  const auto c = sharpe(Vector::Constant(5, 0.02));
  CHECK(c.vol == 0.0);
  CHECK(c.undefined);
  CHECK(std::isfinite(c.sharpe));
  CHECK_THROWS_AS(sharpe(Vector::Ones(1)), ValidationError);
}

TEST_CASE("sharpe matches a two-pass oracle and is scale free") {
  Stream rng(50);
  const Vector r = random_returns(rng, 360);
  const auto s = sharpe(r);
  CHECK(std::abs(s.mean - oracle::mean_two_pass(to_std(r))) <= 1e-12);
  CHECK(std::abs(s.vol - oracle::sd_two_pass(to_std(r))) <= 1e-12);
  CHECK(sharpe(3.7 * r).sharpe == doctest::Approx(s.sharpe).epsilon(1e-12));
}

TEST_CASE("hj_distance closed forms") {
  Stream rng(51);
  // P = 1: (E[M F])^2 / E[F^2]
  const Vector f = oracle::random_vector(rng, 20);
  const Vector M = oracle::random_vector(rng, 20);
  const double emf = M.dot(f) / 20.0;
  const double ef2 = f.squaredNorm() / 20.0;
  CHECK(hj_distance(M, f) == doctest::Approx(emf * emf / ef2).epsilon(1e-12));

  // Pricing errors orthogonal to every factor
  const Matrix F = oracle::random_matrix(rng, 30, 4);
  const Vector raw = oracle::random_vector(rng, 30);
  const Vector orth = raw - F * F.colPivHouseholderQr().solve(raw);
  CHECK(hj_distance(orth, F) <= 1e-20);
  CHECK_THROWS_AS(hj_distance(Vector::Ones(3), Matrix::Ones(4, 2)), ValidationError);
}

TEST_CASE("hj_distance matches an explicit pseudoinverse") {
  Stream rng(52);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix F = oracle::random_matrix(rng, 50, 8);
    const Vector M = oracle::random_vector(rng, 50);
    const Vector g = F.transpose() * M / 50.0;
    const Matrix G = F.transpose() * F / 50.0;
    Eigen::JacobiSVD<Matrix> svd(G, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Vector inv = svd.singularValues();
    for (Index i = 0; i < inv.size(); ++i) inv(i) = inv(i) > 1e-10 * inv(0) ? 1.0 / inv(i) : 0.0;
    const Matrix pinv = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
    const double expected = g.dot(pinv * g);
    CHECK(std::abs(hj_distance(M, F) - expected) <= 1e-9 * std::max(1.0, expected));

    // jointly rotating factor coordinates leaves the distance unchanged
    const Matrix Q = Eigen::HouseholderQR<Matrix>(oracle::random_matrix(rng, 8, 8)).householderQ();
    CHECK(std::abs(hj_distance(M, F * Q) - hj_distance(M, F)) <= 1e-9);
  }
}

TEST_CASE("hj_distance with rank-deficient factors") {
  Stream rng(53);
  Matrix F = oracle::random_matrix(rng, 40, 3);
  Matrix Fd(40, 4);
  Fd << F, F.col(0);
  const Vector M = oracle::random_vector(rng, 40);
  CHECK(hj_distance(M, Fd) == doctest::Approx(hj_distance(M, F)).epsilon(1e-9));
}

TEST_CASE("tail_curves fixed cases") {
  const Vector r{{-0.05, -0.03, -0.01, 0.0, 0.01, 0.02, 0.03, 0.04, 0.05, 0.06}};
  const auto t = tail_curves(r, {0.2, 0.9});
  CHECK(t.quantile[0] == -0.03);
  CHECK(t.es[0] == doctest::Approx(-0.04).epsilon(1e-15));
  CHECK(std::isnan(t.utm[0]));
  CHECK(t.quantile[1] == 0.05);
  CHECK(t.utm[1] == doctest::Approx(0.055).epsilon(1e-15));
  CHECK_THROWS_AS(tail_curves(r.head(4), {0.5}), ValidationError);
  CHECK_THROWS_AS(tail_curves(r, {1.0}), ValidationError);
}

TEST_CASE("tail_curves match a sort-and-average oracle") {
  Stream rng(54);
  const MetricGrids grids;
  for (int trial = 0; trial < 20; ++trial) {
    const Vector r = random_returns(rng, 7 + static_cast<Index>(rng.index(100)));
    const auto t = tail_curves(r, grids.q_grid);
    const auto x = to_std(r);
    for (std::size_t i = 0; i < grids.q_grid.size(); ++i) {
      const double q = grids.q_grid[i];
      const double Q = oracle::order_quantile(x, q);
      CHECK(t.quantile[i] == Q);
      double sum = 0.0;
      int n = 0;
      for (double v : x) {
        if ((q <= 0.5 && v <= Q) || (q > 0.5 && v >= Q)) {
          sum += v;
          ++n;
        }
      }
      if (q <= 0.5) {
        CHECK(t.es[i] == doctest::Approx(sum / n).epsilon(1e-14));
        CHECK(t.es[i] <= t.quantile[i]);
      } else {
        CHECK(t.utm[i] == doctest::Approx(sum / n).epsilon(1e-14));
        CHECK(t.utm[i] >= t.quantile[i]);
      }
    }
  }
}

TEST_CASE("certainty_equivalent closed forms") {
  const Vector r{{0.1, -0.1}};
  CHECK(certainty_equivalent(r, 2.0) == doctest::Approx(-0.01).epsilon(1e-12));
  for (double g : {0.0, 1.0, 2.0, 5.0}) {
    CHECK(certainty_equivalent(Vector::Constant(6, 0.013), g) == doctest::Approx(0.013).epsilon(1e-13));
  }
  CHECK(certainty_equivalent(r, 0.0) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
}

TEST_CASE("certainty_equivalent domain error names the month") {
  const Vector r{{0.1, -1.2, 0.0}};
  try {
    certainty_equivalent(r, 2.0, {200001, 200002, 200003});
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("200002") != std::string::npos);
  }
}

TEST_CASE("certainty_equivalent matches an extended-precision oracle") {
  Stream rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector r = random_returns(rng, 120, 0.1);
    double prev = std::numeric_limits<double>::infinity();
    for (double g : {1.0, 2.0, 5.0}) {
      const double ce = certainty_equivalent(r, g);
      CHECK(std::abs(ce - oracle::ce_long_double(to_std(r), g)) <= 1e-12);
      CHECK(ce <= prev);
      prev = ce;
    }
    CHECK(certainty_equivalent(r, 0.5) <= r.mean() + 1e-15);
    const double ce1 = certainty_equivalent(r, 1.0);
    for (double g : {1.0 - 1e-6, 1.0 + 1e-6}) {
      CHECK(std::abs(certainty_equivalent(r, g) - ce1) <= 1e-6 * (1.0 + std::abs(ce1)));
    }
  }
}

TEST_CASE("dominance_summary conventions") {
  Stream rng(56);
  const Vector b = random_returns(rng, 30);
  const auto months = month_ids(30);
  const MetricGrids grids;
  const auto up = dominance_summary(b.array() + 0.001, months, b, months, grids.q_grid);
  CHECK(up.pathwise_rate == 1.0);
  CHECK(up.quantile_rate == 1.0);
  const auto same = dominance_summary(b, months, b, months, grids.q_grid);
  CHECK(same.pathwise_rate == 0.0);
  CHECK(same.quantile_rate == 1.0);
  auto shifted = months;
  shifted.back() += 1;
  CHECK_THROWS_AS(dominance_summary(b, months, b, shifted, grids.q_grid), ValidationError);
}

TEST_CASE("dominance_summary matches counting") {
  Stream rng(57);
  const MetricGrids grids;
  for (int trial = 0; trial < 10; ++trial) {
    const Vector a = random_returns(rng, 40);
    const Vector b = random_returns(rng, 40);
    const auto months = month_ids(40);
    const auto d = dominance_summary(a, months, b, months, grids.q_grid);
    int wins = 0;
    for (Index i = 0; i < 40; ++i) wins += a(i) > b(i);
    CHECK(d.pathwise_rate == wins / 40.0);
    int qwins = 0;
    for (double q : grids.q_grid) qwins += oracle::order_quantile(to_std(a), q) >= oracle::order_quantile(to_std(b), q);
    CHECK(d.quantile_rate == static_cast<double>(qwins) / static_cast<double>(grids.q_grid.size()));
  }
}

TEST_CASE("compute_metrics assembles a report") {
  Stream rng(58);
  const Vector r = random_returns(rng, 60);
  const Matrix F = oracle::random_matrix(rng, 60, 5);
  const auto rep = compute_metrics(r, month_ids(60), F);
  CHECK(rep.n_obs == 60);
  CHECK(rep.ce.size() == 3);
  CHECK(rep.hjd >= 0.0);
  const auto no_f = compute_metrics(r, month_ids(60), Matrix(60, 0));
  CHECK(std::isnan(no_f.hjd));
  Vector bad = r;
  bad(3) = -2.0;
  const auto degraded = compute_metrics(bad, month_ids(60), Matrix(60, 0));
  CHECK(std::isnan(degraded.ce[0]));
  CHECK(degraded.ce_note.find("200004") != std::string::npos);
  CHECK(to_json(degraded)["ce"][0].is_null());
}
