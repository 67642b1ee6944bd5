#pragma once

// Dense real linear algebra used by the estimators.
//
// Storage is Eigen's default column-major `Eigen::MatrixXd`. All functions are
// pure: they never mutate their arguments and hold no global state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lrrl/errors.hpp"
#include "lrrl/rng.hpp"

namespace lrrl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline constexpr double kOrthonormalTolerance = 1e-10;
inline constexpr double kRankTolerance = 1e-12;
inline constexpr std::size_t kDefaultSubspaceIterations = 100;

inline bool all_finite(const Matrix& a) { return a.allFinite(); }

inline void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) throw ParameterError(std::string(what) + " contains non-finite entries");
}

/// A matrix with orthonormal columns (BᵀB = I). Only constructible through
/// checked factories or the decompositions below, which guarantee it.
class OrthonormalBasis {
 public:
  /// Validates ‖BᵀB − I‖_max ≤ tol; throws ParameterError otherwise.
  static OrthonormalBasis from_matrix(Matrix b, double tol = kOrthonormalTolerance) {
    if (b.cols() > b.rows())
      throw ParameterError("orthonormal basis needs cols <= rows");
    require_finite(b, "orthonormal basis");
    const Matrix gram = b.transpose() * b;
    const double dev = (gram - Matrix::Identity(b.cols(), b.cols())).cwiseAbs().maxCoeff();
    if (b.cols() > 0 && dev > tol)
      throw ParameterError("matrix is not orthonormal (max |BᵀB - I| = " + std::to_string(dev) + ")");
    return OrthonormalBasis(std::move(b));
  }

  /// First `cols` columns of the identity in ℝ^rows.
  static OrthonormalBasis canonical(Index rows, Index cols) {
    return OrthonormalBasis(Matrix::Identity(rows, cols));
  }

  const Matrix& matrix() const noexcept { return b_; }
  Index rows() const noexcept { return b_.rows(); }
  Index cols() const noexcept { return b_.cols(); }

 private:
  explicit OrthonormalBasis(Matrix b) : b_(std::move(b)) {}
  Matrix b_;

  friend OrthonormalBasis trusted_basis(Matrix);
};

/// Wraps a matrix already known to be orthonormal (output of Householder QR).
inline OrthonormalBasis trusted_basis(Matrix b) { return OrthonormalBasis(std::move(b)); }

struct QrResult {
  OrthonormalBasis q;
  Matrix r;
};

namespace detail {

/// Thin Householder QR with nonnegative diagonal of R. Always returns an
/// orthonormal Q, even for rank-deficient input.
inline std::pair<Matrix, Matrix> householder_thin_qr(const Matrix& a) {
  const Index m = a.rows();
  const Index n = a.cols();
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(m, n);
  Matrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0.0) {
      r.row(j) *= -1.0;
      q.col(j) *= -1.0;
    }
  }
  return {std::move(q), std::move(r)};
}

/// Index of the first column whose R diagonal falls below the rank tolerance,
/// or -1 if the factor is well posed.
inline Index first_dependent_column(const Matrix& r) {
  const Index n = r.cols();
  if (n == 0) return -1;
  const double largest = r.diagonal().cwiseAbs().maxCoeff();
  if (largest == 0.0) return 0;
  for (Index j = 0; j < n; ++j)
    if (std::abs(r(j, j)) <= kRankTolerance * largest) return j;
  return -1;
}

}  // namespace detail

/// Thin QR of a tall full-column-rank matrix, with R's diagonal nonnegative so
/// the factorization is unique. Throws DegenerateInputError naming the first
/// column that is (numerically) in the span of its predecessors.
inline QrResult qr_decompose(const Matrix& a) {
  if (a.rows() < a.cols()) throw ParameterError("qr_decompose needs rows >= cols");
  require_finite(a, "qr_decompose input");
  auto [q, r] = detail::householder_thin_qr(a);
  if (const Index bad = detail::first_dependent_column(r); bad >= 0)
    throw DegenerateInputError(static_cast<std::size_t>(bad), "qr_decompose: rank-deficient input");
  return QrResult{trusted_basis(std::move(q)), std::move(r)};
}

/// argmin_x ‖Ax − b‖₂ through thin QR (R x = Qᵀ b).
inline Vector least_squares(const Matrix& a, const Vector& b) {
  if (a.rows() != b.size()) throw ParameterError("least_squares: rows(A) != size(b)");
  if (a.rows() < a.cols()) throw ParameterError("least_squares needs rows >= cols");
  require_finite(b, "least_squares rhs");
  const QrResult f = qr_decompose(a);
  const Vector qtb = f.q.matrix().transpose() * b;
  return f.r.triangularView<Eigen::Upper>().solve(qtb);
}

/// SE(B1, B2) = ‖(I − B1B1ᵀ)B2‖_F, evaluated as ‖B2 − B1(B1ᵀB2)‖_F so the
/// d×d projector is never formed. Zero iff the spans coincide, at most √r.
inline double subspace_error(const OrthonormalBasis& b1, const OrthonormalBasis& b2) {
  if (b1.rows() != b2.rows() || b1.cols() != b2.cols())
    throw ParameterError("subspace_error: basis dimensions differ");
  const Matrix overlap = b1.matrix().transpose() * b2.matrix();
  return (b2.matrix() - b1.matrix() * overlap).norm();
}

inline double frobenius_norm(const Matrix& a) { return a.norm(); }

/// Largest singular value by power iteration on AᵀA, from a fixed
/// pseudo-random start vector. Stops once the relative change of the
/// estimate drops below `tol`.
inline double spectral_norm(const Matrix& a, double tol = 1e-13, std::size_t max_iters = 20000) {
  require_finite(a, "spectral_norm input");
  if (a.size() == 0) return 0.0;
  Rng rng(0x5eed5eedULL);
  Vector v = rng.gaussian_vector(a.cols());
  v.normalize();
  double sigma = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    const Vector av = a * v;
    const double next = av.norm();
    if (next == 0.0) return 0.0;
    Vector w = a.transpose() * av;
    const double wn = w.norm();
    if (wn == 0.0) return next;
    v = w / wn;
    if (std::abs(next - sigma) <= tol * next) return next;
    sigma = next;
  }
  return sigma;
}

struct SubspaceResult {
  OrthonormalBasis basis;
  /// Ritz estimates of the leading singular values, descending. Holds r + 1
  /// entries when σ_{r+1} is observable.
  Vector singular_values;
  /// Set when σ_r / σ_{r+1} < 1 + 1e-8 (or σ_r = 0): the dominant subspace is
  /// not well defined and the returned basis is one arbitrary choice.
  bool gap_warning = false;
};

/// Iteration count C·log(μ r κ), at least one.
inline std::size_t subspace_iteration_count(double mu, std::size_t r, double kappa, double c) {
  const double arg = mu * static_cast<double>(r) * kappa;
  const double n = std::ceil(c * std::log(std::max(arg, 1.0 + 1e-12)));
  return static_cast<std::size_t>(std::max(1.0, n));
}

/// Dominant r-dimensional left singular subspace of A by block subspace
/// iteration on AAᵀ, re-orthonormalized by QR every step and finished with a
/// Rayleigh-Ritz rotation. The block carries a few extra columns so that the
/// convergence rate is governed by σ_{p+1}/σ_r rather than σ_{r+1}/σ_r.
inline SubspaceResult top_r_left_singular_vectors(const Matrix& a, std::size_t r,
                                                  std::size_t iters, Rng& rng,
                                                  std::size_t oversample = 5) {
  const Index rows = a.rows();
  const Index cols = a.cols();
  const auto rank = static_cast<Index>(r);
  if (r == 0 || rank > std::min(rows, cols))
    throw ParameterError("top_r_left_singular_vectors: r must be in [1, min(rows, cols)]");
  if (iters == 0) throw ParameterError("top_r_left_singular_vectors: iters must be >= 1");
  require_finite(a, "top_r_left_singular_vectors input");

  const Index block = std::min(rows, rank + static_cast<Index>(std::max<std::size_t>(oversample, 1)));
  Matrix q = detail::householder_thin_qr(a * rng.gaussian_matrix(cols, block)).first;
  for (std::size_t it = 0; it < iters; ++it) {
    const Matrix z = a * (a.transpose() * q);
    q = detail::householder_thin_qr(z).first;
  }

  const Matrix projected = a.transpose() * q;  // cols × block
  const Matrix small = projected.transpose() * projected;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(small);
  // Eigen sorts ascending; reverse to descending.
  const Matrix rotation = eig.eigenvectors().rowwise().reverse();
  const Vector lambdas = eig.eigenvalues().reverse();

  Matrix ritz = q * rotation;
  // Re-orthonormalize to wash out round-off from the rotation.
  Matrix basis = detail::householder_thin_qr(ritz.leftCols(rank)).first;
  // Keep the Ritz vector orientation (QR may flip signs only).
  for (Index j = 0; j < rank; ++j)
    if (basis.col(j).dot(ritz.col(j)) < 0.0) basis.col(j) *= -1.0;

  const Index kept = std::min<Index>(block, rank + 1);
  Vector sv(kept);
  for (Index j = 0; j < kept; ++j) sv(j) = std::sqrt(std::max(0.0, lambdas(j)));

  bool warn = sv(rank - 1) <= 0.0;
  if (!warn && kept > rank) {
    const double next = sv(rank);
    warn = next > 0.0 && sv(rank - 1) / next < 1.0 + 1e-8;
  }
  return SubspaceResult{trusted_basis(std::move(basis)), std::move(sv), warn};
}

}  // namespace lrrl
