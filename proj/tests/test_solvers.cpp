#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "sparsesdf/error.hpp"
#include "sparsesdf/solvers.hpp"

using namespace sparsesdf;

namespace {

Matrix row(std::initializer_list<double> values) {
  Matrix F(1, static_cast<Index>(values.size()));
  Index j = 0;
  for (double v : values) F(0, j++) = v;
  return F;
}

}  // namespace

TEST_CASE("ridgeless closed forms") {
  const auto a = ridgeless(row({1.0, 1.0}));
  CHECK(a.method == Method::Ridgeless);
  CHECK(a.lambda(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(a.lambda(1) == doctest::Approx(0.5).epsilon(1e-14));
  const auto b = ridgeless(row({2.0, 0.0, 0.0}));
  CHECK(b.lambda(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(b.lambda(1) == 0.0);
  CHECK(b.lambda(2) == 0.0);
}

TEST_CASE("ridgeless agrees with ridge at tiny alpha") {
  Stream rng(10);
  const Matrix F = oracle::random_matrix(rng, 3, 7);
  const auto rl = ridgeless(F);
  const auto rg = ridge(F, 1e-10);
  CHECK((rl.lambda - rg.lambda).norm() / rl.lambda.norm() <= 1e-4);
}

TEST_CASE("ridgeless underparameterized branch") {
  Stream rng(11);
  const Matrix F = oracle::random_matrix(rng, 10, 3);
  const auto s = ridgeless(F);
  CHECK(s.method == Method::Ridge);
  CHECK(s.alpha == 0.0);
  CHECK(s.diagnostics.underparameterized);
  CHECK(s.residual_inf > 1e-3);
  // normal equations hold
  CHECK((F.transpose() * (Vector::Ones(10) - F * s.lambda)).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("ridgeless falls back to a pseudoinverse on rank deficiency") {
  Matrix F(2, 3);
  F << 1, 2, 3, 1, 2, 3;  // duplicate rows, consistent with F lambda = 1
  const auto s = ridgeless(F);
  CHECK(s.diagnostics.pinv_fallback);
  CHECK(s.residual_inf <= 1e-10);
  Vector expected(3);
  expected << 1, 2, 3;
  expected /= 14.0;
  CHECK((s.lambda - expected).norm() <= 1e-12);
}

TEST_CASE("basis pursuit closed forms") {
  const auto a = basis_pursuit(row({2.0, 1.0}));
  CHECK(a.lambda(0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(a.lambda(1) == 0.0);
  CHECK(a.l1_norm == doctest::Approx(0.5).epsilon(1e-14));

  const auto tie = basis_pursuit(row({1.0, 1.0}));
  CHECK(tie.lambda(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(tie.lambda(1) == 0.0);
  CHECK(tie.l1_norm == doctest::Approx(1.0).epsilon(1e-14));

  const auto neg = basis_pursuit(row({-4.0, 1.0, 3.0}));
  CHECK(neg.lambda(0) == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK(neg.support == std::vector<int>{0});
}

TEST_CASE("basis pursuit tie-break prefers low indices") {
  // Columns 1 and 3 are identical and cheapest; the lower index must win.
  Matrix F(2, 4);
  F << 0.1, 1.0, 0.2, 1.0,
       0.3, 1.0, -0.1, 1.0;
  const auto s = basis_pursuit(F);
  CHECK(s.support == std::vector<int>{1});
  CHECK(s.lambda(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("basis pursuit matches exhaustive vertex enumeration") {
  Stream rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const Matrix F = oracle::random_matrix(rng, 2, 5);
    const auto s = basis_pursuit(F);
    CHECK(std::abs(s.l1_norm - oracle::bp_value_by_enumeration(F)) <= 1e-9);
  }
}

TEST_CASE("basis pursuit invariants on random instances") {
  Stream rng(13);
  for (int trial = 0; trial < 40; ++trial) {
    const Index T = 2 + static_cast<Index>(rng.index(8));
    const Index P = T + 1 + static_cast<Index>(rng.index(6 * T));
    const Matrix F = oracle::random_matrix(rng, T, P);
    const auto bp = basis_pursuit(F);
    const auto rl = ridgeless(F);
    CHECK(bp.residual_inf <= 1e-8);
    CHECK(rl.residual_inf <= 1e-8);
    CHECK(static_cast<Index>(bp.support.size()) <= T);
    CHECK(bp.l2_norm <= bp.l1_norm);
    CHECK(std::abs(bp.l1_norm - bp.lambda.lpNorm<1>()) <= 1e-12);
    CHECK(std::abs(bp.l2_norm - bp.lambda.norm()) <= 1e-12);
    CHECK(bp.l1_norm <= rl.l1_norm + 1e-9);
    CHECK(rl.l2_norm <= bp.l2_norm + 1e-9);

    // Points lambda_RL + h with h in ker(F) are feasible; BP has the smallest
    // l1 norm and ridgeless the smallest l2 norm among them.
    const Matrix K = Eigen::FullPivLU<Matrix>(F).kernel();
    for (int k = 0; k < 10; ++k) {
      const Vector h = K * oracle::random_vector(rng, K.cols()) * 0.3;
      const Vector lam = rl.lambda + h;
      CHECK(bp.l1_norm <= lam.lpNorm<1>() + 1e-9);
      CHECK(rl.l2_norm <= lam.norm() + 1e-12);
    }
    // ridgeless lies in row(F): its kernel component vanishes
    CHECK((K.transpose() * rl.lambda).norm() <= 1e-8);
  }
}

TEST_CASE("v_P is nonincreasing along nested column prefixes") {
  Stream rng(14);
  for (int trial = 0; trial < 10; ++trial) {
    const Index T = 4;
    const Matrix big = oracle::random_matrix(rng, T, 64);
    double prev = std::numeric_limits<double>::infinity();
    for (Index P : {8, 16, 32, 64}) {
      const double v = basis_pursuit(big.leftCols(P)).l1_norm;
      CHECK(v <= prev + 1e-9);
      prev = v;
    }
  }
}

TEST_CASE("basis pursuit on rank-deficient and infeasible systems") {
  Matrix dup(3, 4);
  dup << 1, 2, 0, 1,
         1, 2, 0, 1,
         0, 1, 3, 1;
  const auto s = basis_pursuit(dup);
  CHECK(s.diagnostics.dropped_rows == 1);
  CHECK(s.residual_inf <= 1e-10);

  Matrix bad(2, 3);
  bad << 1, 2, 3,
         2, 4, 6;  // second row is 2x the first, yet both must equal 1
  CHECK_THROWS_AS(basis_pursuit(bad), InfeasibleError);
  CHECK_THROWS_AS(basis_pursuit(Matrix::Zero(2, 3)), InfeasibleError);
}

TEST_CASE("basis pursuit degenerate instances terminate") {
  // Many repeated columns create heavy dual degeneracy.
  Stream rng(15);
  Matrix base = oracle::random_matrix(rng, 3, 4);
  Matrix F(3, 40);
  for (Index j = 0; j < 40; ++j) F.col(j) = base.col(j % 4) * (1.0 + static_cast<double>(j / 4 % 2));
  const auto s = basis_pursuit(F);
  CHECK(s.residual_inf <= 1e-9);
  CHECK(s.support.size() <= 3);
  CHECK(std::abs(s.l1_norm - oracle::bp_value_by_enumeration(F.leftCols(8))) <= 1e-9);
}

TEST_CASE("basis pursuit iteration cap") {
  Stream rng(16);
  const Matrix F = oracle::random_matrix(rng, 6, 60);
  SolverOptions opt;
  opt.max_iterations = 1;
  CHECK_THROWS_AS(basis_pursuit(F, opt), DivergedError);
}

TEST_CASE("ridge limits") {
  Stream rng(17);
  const Matrix F = oracle::random_matrix(rng, 4, 9);
  const double alpha = 1e6;
  const auto big = ridge(F, alpha);
  CHECK(big.l2_norm <= (F.transpose() * Vector::Ones(4)).norm() / (2.0 * 4.0 * alpha));

  const auto tiny = ridge(row({1.0, 1.0}), 1e-12);
  CHECK(std::abs(tiny.lambda(0) - 0.5) <= 1e-6);
  CHECK(std::abs(tiny.lambda(1) - 0.5) <= 1e-6);

  const auto rl = ridgeless(F);
  double prev = std::numeric_limits<double>::infinity();
  for (double a : {1e-2, 1e-4, 1e-6, 1e-8, 1e-10}) {
    const double dist = (ridge(F, a).lambda - rl.lambda).norm();
    CHECK(dist < prev);
    prev = dist;
  }
  CHECK_THROWS_AS(ridge(F, 0.0), ValidationError);
}

TEST_CASE("l1_path limits") {
  Stream rng(18);
  const Matrix F = oracle::random_matrix(rng, 3, 8);
  CHECK(l1_path(F, 1e6).lambda.isZero(0.0));

  const auto s = l1_path(row({2.0, 1.0}), 1e-10);
  CHECK(std::abs(s.lambda(0) - 0.5) <= 1e-5);
  CHECK(std::abs(s.lambda(1)) <= 1e-5);

  const double v = basis_pursuit(F).l1_norm;
  CHECK(std::abs(l1_path(F, 1e-9).l1_norm - v) <= 1e-4);
  CHECK_THROWS_AS(l1_path(F, -1.0), ValidationError);
}

TEST_CASE("l1_path satisfies the lasso optimality conditions") {
  Stream rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix F = oracle::random_matrix(rng, 5, 12);
    const double alpha = 0.01 * (1 + trial);
    const auto s = l1_path(F, alpha);
    const Vector grad = F.transpose() * (Vector::Ones(5) - F * s.lambda) / 5.0;
    for (Index j = 0; j < 12; ++j) {
      if (s.lambda(j) != 0.0) {
        CHECK(std::abs(grad(j) - alpha * (s.lambda(j) > 0 ? 1.0 : -1.0)) <= 1e-8);
      } else {
        CHECK(std::abs(grad(j)) <= alpha + 1e-8);
      }
    }
  }
}

TEST_CASE("method names round trip") {
  for (Method m : {Method::BasisPursuit, Method::Ridgeless, Method::Ridge, Method::L1}) {
    CHECK(method_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(method_from_string("ols"), ValidationError);
}
