#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the library's numerical code paths.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "sparsesdf/rng.hpp"
#include "sparsesdf/types.hpp"

namespace oracle {

using sparsesdf::Index;
using sparsesdf::Matrix;
using sparsesdf::Vector;

inline Matrix random_matrix(sparsesdf::Stream& rng, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

inline Vector random_vector(sparsesdf::Stream& rng, Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = rng.normal();
  return v;
}

/// Calls fn(subset) for every k-subset of {0..n-1} in lexicographic order.
inline void for_each_subset(int n, int k, const std::function<void(const std::vector<int>&)>& fn) {
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    fn(idx);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

/// Minimum l1 norm over all basic solutions of F lambda = 1 (F full row rank).
/// Every vertex of the split-variable LP is a nonsingular T-column basis with
/// column signs matching the solution, so this enumerates all vertices.
inline double bp_value_by_enumeration(const Matrix& F) {
  const int T = static_cast<int>(F.rows());
  const int P = static_cast<int>(F.cols());
  double best = std::numeric_limits<double>::infinity();
  for_each_subset(P, T, [&](const std::vector<int>& cols) {
    Matrix B(T, T);
    for (int i = 0; i < T; ++i) B.col(i) = F.col(cols[i]);
    Eigen::FullPivLU<Matrix> lu(B);
    if (lu.rank() < T) return;
    const Vector x = lu.solve(Vector::Ones(T));
    best = std::min(best, x.lpNorm<1>());
  });
  return best;
}

/// Projector onto row(F) from modified Gram-Schmidt on the rows.
inline Matrix gram_schmidt_row_projector(const Matrix& F) {
  std::vector<Vector> basis;
  for (Index i = 0; i < F.rows(); ++i) {
    Vector v = F.row(i).transpose();
    for (const Vector& q : basis) v -= q.dot(v) * q;
    for (const Vector& q : basis) v -= q.dot(v) * q;  // reorthogonalize
    const double n = v.norm();
    if (n > 1e-12) basis.push_back(v / n);
  }
  Matrix Pi = Matrix::Zero(F.cols(), F.cols());
  for (const Vector& q : basis) Pi += q * q.transpose();
  return Pi;
}

/// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double power_iteration(const Matrix& S, int iters = 20000) {
  Vector v = Vector::Ones(S.rows()) / std::sqrt(static_cast<double>(S.rows()));
  double value = 0.0;
  for (int k = 0; k < iters; ++k) {
    Vector w = S * v;
    const double n = w.norm();
    if (n == 0.0) return 0.0;
    v = w / n;
    value = v.dot(S * v);
  }
  return value;
}

inline double mean_two_pass(const std::vector<double>& x) {
  long double s = 0;
  for (double v : x) s += v;
  return static_cast<double>(s / x.size());
}

inline double sd_two_pass(const std::vector<double>& x) {
  const long double m = mean_two_pass(x);
  long double ss = 0;
  for (double v : x) ss += (v - m) * (v - m);
  return static_cast<double>(std::sqrt(ss / (x.size() - 1)));
}

/// Lower order statistic with k = ceil(qN) on a sorted copy.
inline double order_quantile(std::vector<double> x, double q) {
  std::sort(x.begin(), x.end());
  const auto k = static_cast<std::size_t>(std::ceil(q * static_cast<double>(x.size())));
  return x[std::max<std::size_t>(k, 1) - 1];
}

/// Certainty equivalent in long double arithmetic.
inline double ce_long_double(const std::vector<double>& r, double gamma) {
  const long double n = r.size();
  if (gamma == 1.0) {
    long double s = 0;
    for (double v : r) s += std::log(1.0L + v);
    return static_cast<double>(std::exp(s / n) - 1.0L);
  }
  long double s = 0;
  const long double e = 1.0L - gamma;
  for (double v : r) s += std::pow(1.0L + v, e);
  return static_cast<double>(std::pow(s / n, 1.0L / e) - 1.0L);
}

}  // namespace oracle
