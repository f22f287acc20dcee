#pragma once

// Dense tableau simplex for the support function of a symmetric H-polytope
//   maximize <v, x>  subject to  |<a_i, x>| <= b_i,  i = 1..m,
// with free x. The origin is feasible (b_i > 0) so the slack basis is a
// starting vertex and no phase one is needed. Bland's rule prevents cycling.

#include <Eigen/Dense>

#include <cmath>
#include <concepts>
#include <limits>
#include <sstream>

#include "gshift/errors.hpp"
#include "gshift/matrix_core.hpp"

namespace gshift {

enum class LpStatus { optimal, unbounded };

template <std::floating_point Scalar>
struct LpResult {
  LpStatus status = LpStatus::optimal;
  Scalar value = Scalar(0);  ///< +inf when unbounded
  VectorX<Scalar> argmax;    ///< maximizer when optimal, empty otherwise
  int iterations = 0;
};

template <typename DerivedA, typename DerivedB, typename DerivedV>
LpResult<typename DerivedA::Scalar> maximize_symmetric_polytope(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
    const Eigen::MatrixBase<DerivedV>& v) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = MatrixX<Scalar>;
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  detail::require_dim(b.size(), m, "simplex: rhs");
  detail::require_dim(v.size(), n, "simplex: objective");
  if (m == 0) throw ShapeError("simplex: no constraints");
  if ((b.array() <= Scalar(0)).any()) throw DomainError("simplex: rhs must be positive");

  LpResult<Scalar> result;
  const Scalar vnorm = v.norm();
  if (vnorm == Scalar(0)) {
    result.argmax = VectorX<Scalar>::Zero(n);
    return result;
  }

  // Rows scaled to unit rhs, objective scaled to unit norm.
  const Matrix rows = b.cwiseInverse().asDiagonal() * a;
  const VectorX<Scalar> c = v / vnorm;

  // Columns: x+ (n), x- (n), slacks (2m), rhs. Last row holds reduced costs.
  const Eigen::Index nrows = 2 * m;
  const Eigen::Index ncols = 2 * n + 2 * m;
  Matrix tab = Matrix::Zero(nrows + 1, ncols + 1);
  tab.block(0, 0, m, n) = rows;
  tab.block(0, n, m, n) = -rows;
  tab.block(m, 0, m, n) = -rows;
  tab.block(m, n, m, n) = rows;
  tab.block(0, 2 * n, nrows, nrows).setIdentity();
  tab.col(ncols).head(nrows).setOnes();
  tab.row(nrows).head(n) = -c.transpose();
  tab.row(nrows).segment(n, n) = c.transpose();

  Eigen::VectorXi basis(nrows);
  for (Eigen::Index i = 0; i < nrows; ++i) basis[i] = static_cast<int>(2 * n + i);

  constexpr Scalar tol = Scalar(1e-12);
  const int max_iter = static_cast<int>(50 * (nrows + n));
  for (int iter = 0;; ++iter) {
    if (iter >= max_iter) {
      std::ostringstream os;
      os << "simplex: iteration limit " << max_iter << " reached (" << m << " constraints, dim "
         << n << ")";
      throw NumericError(os.str());
    }
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < ncols; ++j) {
      if (tab(nrows, j) < -tol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) {
      result.iterations = iter;
      break;
    }

    Eigen::Index leave = -1;
    Scalar best = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < nrows; ++i) {
      const Scalar pivot = tab(i, enter);
      if (pivot <= tol) continue;
      const Scalar ratio = tab(i, ncols) / pivot;
      if (leave < 0 || ratio < best - tol) {
        best = ratio;
        leave = i;
      } else if (ratio <= best + tol && basis[i] < basis[leave]) {
        best = std::min(best, ratio);
        leave = i;
      }
    }
    if (leave < 0) {
      result.status = LpStatus::unbounded;
      result.value = std::numeric_limits<Scalar>::infinity();
      result.iterations = iter;
      return result;
    }

    tab.row(leave) /= tab(leave, enter);
    for (Eigen::Index i = 0; i <= nrows; ++i) {
      if (i == leave) continue;
      const Scalar factor = tab(i, enter);
      if (factor != Scalar(0)) tab.row(i) -= factor * tab.row(leave);
    }
    basis[leave] = static_cast<int>(enter);
  }

  VectorX<Scalar> x = VectorX<Scalar>::Zero(n);
  for (Eigen::Index i = 0; i < nrows; ++i) {
    const Eigen::Index j = basis[i];
    if (j < n) {
      x[j] += tab(i, ncols);
    } else if (j < 2 * n) {
      x[j - n] -= tab(i, ncols);
    }
  }
  result.argmax = x;
  result.value = v.dot(x);
  return result;
}

}  // namespace gshift
