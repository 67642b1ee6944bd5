#pragma once

// Brute-force references used only by the tests. Deliberately written with
// plain loops over std::vector so they share no code with the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Dense = std::vector<std::vector<double>>;  // row-major, m[i][j]

inline Dense from_eigen(const Eigen::MatrixXd& a) {
  Dense m(static_cast<std::size_t>(a.rows()), std::vector<double>(static_cast<std::size_t>(a.cols())));
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) m[i][j] = a(i, j);
  return m;
}

inline Eigen::MatrixXd to_eigen(const Dense& m) {
  const auto rows = static_cast<Eigen::Index>(m.size());
  const auto cols = rows ? static_cast<Eigen::Index>(m[0].size()) : 0;
  Eigen::MatrixXd a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = m[i][j];
  return a;
}

inline std::size_t rows(const Dense& m) { return m.size(); }
inline std::size_t cols(const Dense& m) { return m.empty() ? 0 : m[0].size(); }

inline Dense multiply(const Dense& a, const Dense& b) {
  Dense c(rows(a), std::vector<double>(cols(b), 0.0));
  for (std::size_t i = 0; i < rows(a); ++i)
    for (std::size_t k = 0; k < cols(a); ++k)
      for (std::size_t j = 0; j < cols(b); ++j) c[i][j] += a[i][k] * b[k][j];
  return c;
}

inline Dense transpose(const Dense& a) {
  Dense t(cols(a), std::vector<double>(rows(a)));
  for (std::size_t i = 0; i < rows(a); ++i)
    for (std::size_t j = 0; j < cols(a); ++j) t[j][i] = a[i][j];
  return t;
}

/// Classical Gram–Schmidt with one full reorthogonalization pass.
/// Returns (Q, R) with R upper triangular and a nonnegative diagonal.
inline std::pair<Dense, Dense> gram_schmidt(const Dense& a) {
  const std::size_t m = rows(a), n = cols(a);
  Dense q(m, std::vector<double>(n, 0.0));
  Dense r(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> v(m);
    for (std::size_t i = 0; i < m; ++i) v[i] = a[i][j];
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < m; ++i) dot += q[i][k] * v[i];
        r[k][j] += dot;
        for (std::size_t i = 0; i < m; ++i) v[i] -= dot * q[i][k];
      }
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) throw std::runtime_error("gram_schmidt: dependent column");
    r[j][j] = norm;
    for (std::size_t i = 0; i < m; ++i) q[i][j] = v[i] / norm;
  }
  return {q, r};
}

struct Svd {
  Dense u;                     // m×n, columns sorted by singular value
  std::vector<double> sigma;   // descending
};

/// One-sided Jacobi SVD (Hestenes) on an m×n matrix with m >= n.
inline Svd jacobi_svd(const Dense& a) {
  const std::size_t m = rows(a), n = cols(a);
  Dense u = a;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += u[i][p] * u[i][p];
          beta += u[i][q] * u[i][q];
          gamma += u[i][p] * u[i][q];
        }
        if (gamma == 0.0) continue;
        off = std::max(off, std::abs(gamma) / std::sqrt(alpha * beta));
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = (zeta >= 0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double up = u[i][p], uq = u[i][q];
          u[i][p] = c * up - s * uq;
          u[i][q] = s * up + c * uq;
        }
      }
    }
    if (off < 1e-15) break;
  }
  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += u[i][j] * u[i][j];
    sigma[j] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sigma[x] > sigma[y]; });
  Svd out{Dense(m, std::vector<double>(n, 0.0)), std::vector<double>(n)};
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    out.sigma[k] = sigma[j];
    for (std::size_t i = 0; i < m; ++i) out.u[i][k] = sigma[j] > 0 ? u[i][j] / sigma[j] : 0.0;
  }
  return out;
}

/// Solves the square system M x = b by Gaussian elimination with partial pivoting.
inline std::vector<double> solve(Dense m, std::vector<double> b) {
  const std::size_t n = m.size();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(m[i][k]) > std::abs(m[piv][k])) piv = i;
    std::swap(m[k], m[piv]);
    std::swap(b[k], b[piv]);
    if (m[k][k] == 0.0) throw std::runtime_error("solve: singular");
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = m[i][k] / m[k][k];
      for (std::size_t j = k; j < n; ++j) m[i][j] -= f * m[k][j];
      b[i] -= f * b[k];
    }
  }
  std::vector<double> x(n);
  for (std::size_t k = n; k-- > 0;) {
    double s = b[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= m[k][j] * x[j];
    x[k] = s / m[k][k];
  }
  return x;
}

/// argmin ‖A x − b‖ through the normal equations AᵀA x = Aᵀb.
inline std::vector<double> normal_equations(const Dense& a, const std::vector<double>& b) {
  const Dense at = transpose(a);
  const Dense ata = multiply(at, a);
  std::vector<double> atb(cols(a), 0.0);
  for (std::size_t j = 0; j < cols(a); ++j)
    for (std::size_t i = 0; i < rows(a); ++i) atb[j] += a[i][j] * b[i];
  return solve(ata, atb);
}

/// ‖(I − P_U) V‖_F for orthonormal U, V given as Dense column blocks.
inline double projection_residual(const Dense& u, const Dense& v) {
  const Dense utv = multiply(transpose(u), v);
  const Dense proj = multiply(u, utv);
  double s = 0.0;
  for (std::size_t i = 0; i < rows(v); ++i)
    for (std::size_t j = 0; j < cols(v); ++j) s += (v[i][j] - proj[i][j]) * (v[i][j] - proj[i][j]);
  return std::sqrt(s);
}

/// Central finite-difference gradient of f at x (entrywise).
inline Eigen::MatrixXd finite_difference(const std::function<double(const Eigen::MatrixXd&)>& f,
                                         const Eigen::MatrixXd& x, double h = 1e-6) {
  Eigen::MatrixXd g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Eigen::MatrixXd xp = x, xm = x;
      xp(i, j) += h;
      xm(i, j) -= h;
      g(i, j) = (f(xp) - f(xm)) / (2.0 * h);
    }
  }
  return g;
}

/// Two-pass mean and n−1 sample variance.
inline std::pair<double, double> mean_variance(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, ss / static_cast<double>(xs.size() - 1)};
}

}  // namespace oracle
