#pragma once

// Small dense SPD linear algebra on top of Eigen: validated covariance
// matrices with cached factors, unit directions, Mahalanobis norms.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <sstream>

#include "gshift/errors.hpp"

namespace gshift {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Largest dimension accepted by the dense routines.
inline constexpr Eigen::Index kMaxDim = 64;

/// Smallest admissible ratio lambda_min / lambda_max for SPD and invertibility checks.
inline constexpr double kConditionFloor = 1e-10;

/// Relative asymmetry tolerated (and then symmetrized away).
inline constexpr double kSymmetryTolerance = 1e-12;

namespace detail {

inline void require_dim(Eigen::Index got, Eigen::Index expected, const char* what) {
  if (got != expected) {
    std::ostringstream os;
    os << what << ": dimension mismatch (" << got << " vs " << expected << ")";
    throw ShapeError(os.str());
  }
}

template <typename Derived>
void require_square_finite(const Eigen::MatrixBase<Derived>& m, const char* what) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a nonempty square matrix, got " << m.rows() << "x" << m.cols();
    throw ShapeError(os.str());
  }
  if (m.rows() > kMaxDim) {
    std::ostringstream os;
    os << what << ": dimension " << m.rows() << " exceeds the cap " << kMaxDim;
    throw ShapeError(os.str());
  }
  if (!m.allFinite()) throw ShapeError(std::string(what) + ": non-finite entry");
}

template <typename Derived>
bool is_symmetric(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  const Scalar scale = std::max(m.cwiseAbs().maxCoeff(), Scalar(1e-300));
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= Scalar(kSymmetryTolerance) * scale;
}

}  // namespace detail

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
template <typename Scalar>
struct SymEigen {
  VectorX<Scalar> values;
  MatrixX<Scalar> vectors;  ///< columns are orthonormal eigenvectors

  MatrixX<Scalar> reconstruct() const {
    return vectors * values.asDiagonal() * vectors.transpose();
  }
};

template <typename Derived>
SymEigen<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& s) {
  using Scalar = typename Derived::Scalar;
  detail::require_square_finite(s, "sym_eigen");
  if (!detail::is_symmetric(s)) throw ShapeError("sym_eigen: matrix is not symmetric");
  const MatrixX<Scalar> sym = (s + s.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<MatrixX<Scalar>> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericError("sym_eigen: eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Symmetric positive-definite covariance matrix with cached inverse,
/// symmetric square root and inverse square root, and Cholesky factor.
/// Immutable after construction.
template <std::floating_point Scalar>
class Covariance {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  template <typename Derived>
  explicit Covariance(const Eigen::MatrixBase<Derived>& m) {
    detail::require_square_finite(m, "covariance");
    if (!detail::is_symmetric(m)) throw ShapeError("covariance: matrix is not symmetric");
    sigma_ = (m + m.transpose()) / Scalar(2);

    const auto eig = sym_eigen(sigma_);
    const Scalar lmin = eig.values.minCoeff();
    const Scalar lmax = eig.values.maxCoeff();
    if (!(lmin > Scalar(0)) || lmin < Scalar(kConditionFloor) * lmax) {
      std::ostringstream os;
      os << "covariance: not positive definite (eigenvalues in [" << lmin << ", " << lmax << "])";
      throw DefinitenessError(os.str());
    }
    eigenvalues_ = eig.values;
    inv_sqrt_ = eig.vectors * eig.values.cwiseSqrt().cwiseInverse().asDiagonal() *
                eig.vectors.transpose();
    sqrt_ = eig.vectors * eig.values.cwiseSqrt().asDiagonal() * eig.vectors.transpose();

    llt_.compute(sigma_);
    if (llt_.info() != Eigen::Success) throw DefinitenessError("covariance: Cholesky failed");
    inverse_ = llt_.solve(Matrix::Identity(dim(), dim()));
    inverse_ = (inverse_ + inverse_.transpose()).eval() / Scalar(2);
  }

  static Covariance identity(Eigen::Index n) { return Covariance(Matrix::Identity(n, n)); }

  template <typename Derived>
  static Covariance diagonal(const Eigen::MatrixBase<Derived>& d) {
    return Covariance(Matrix(d.asDiagonal()));
  }

  Eigen::Index dim() const noexcept { return sigma_.rows(); }
  const Matrix& matrix() const noexcept { return sigma_; }
  const Matrix& inverse() const noexcept { return inverse_; }
  const Matrix& inv_sqrt() const noexcept { return inv_sqrt_; }
  const Matrix& sqrt() const noexcept { return sqrt_; }
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  Matrix cholesky_factor() const { return llt_.matrixL(); }

  /// Sigma x.
  template <typename Derived>
  Vector apply(const Eigen::MatrixBase<Derived>& x) const {
    detail::require_dim(x.size(), dim(), "apply");
    return sigma_ * x;
  }

  /// Sigma^{-1} b through the Cholesky factor.
  template <typename Derived>
  Vector solve(const Eigen::MatrixBase<Derived>& b) const {
    detail::require_dim(b.size(), dim(), "solve");
    return llt_.solve(b);
  }

 private:
  Matrix sigma_;
  Matrix inverse_;
  Matrix inv_sqrt_;
  Matrix sqrt_;
  Vector eigenvalues_;
  Eigen::LLT<Matrix> llt_;
};

/// Unit vector in R^n.
template <std::floating_point Scalar>
class Direction {
 public:
  using Vector = VectorX<Scalar>;

  /// Accepts a vector that already has unit norm (within 1e-12).
  template <typename Derived>
  explicit Direction(const Eigen::MatrixBase<Derived>& u) : u_(u) {
    if (u_.size() == 0 || !u_.allFinite()) throw ShapeError("direction: empty or non-finite");
    if (std::fabs(u_.norm() - Scalar(1)) > Scalar(1e-12)) {
      std::ostringstream os;
      os << "direction: expected unit norm, got " << u_.norm();
      throw DomainError(os.str());
    }
  }

  /// Rescales a nonzero vector to unit length.
  template <typename Derived>
  static Direction normalized(const Eigen::MatrixBase<Derived>& v) {
    const Scalar norm = v.norm();
    if (!(norm > Scalar(0)) || !std::isfinite(norm)) {
      throw DomainError("direction: cannot normalize a zero or non-finite vector");
    }
    return Direction(Vector(v / norm));
  }

  static Direction axis(Eigen::Index n, Eigen::Index i) { return Direction(Vector(Vector::Unit(n, i))); }

  Eigen::Index dim() const noexcept { return u_.size(); }
  const Vector& vector() const noexcept { return u_; }
  Direction operator-() const { return Direction(Vector(-u_)); }

 private:
  Vector u_;
};

/// <u, M u>.
template <typename DerivedM, typename DerivedU>
typename DerivedM::Scalar quad_form(const Eigen::MatrixBase<DerivedM>& m,
                                    const Eigen::MatrixBase<DerivedU>& u) {
  detail::require_dim(m.rows(), u.size(), "quad_form");
  detail::require_dim(m.cols(), u.size(), "quad_form");
  return u.dot(m * u);
}

/// ||Sigma^{-1/2} u||, cross-checked against sqrt(<u, Sigma^{-1} u>) by a Cholesky solve.
template <std::floating_point Scalar>
Scalar mahalanobis_norm(const Covariance<Scalar>& cov, const Direction<Scalar>& u) {
  detail::require_dim(u.dim(), cov.dim(), "mahalanobis_norm");
  const Scalar via_root = (cov.inv_sqrt() * u.vector()).norm();
  const Scalar via_solve = std::sqrt(u.vector().dot(cov.solve(u.vector())));
  if (std::fabs(via_root - via_solve) > Scalar(1e-10) * via_solve) {
    std::ostringstream os;
    os << "mahalanobis_norm: inconsistent routes " << via_root << " vs " << via_solve;
    throw NumericError(os.str());
  }
  return via_root;
}

}  // namespace gshift
