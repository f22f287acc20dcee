#pragma once

#include <cmath>
#include <concepts>
#include <sstream>

#include "gshift/errors.hpp"

namespace gshift {

namespace detail {

template <typename F, std::floating_point Scalar>
Scalar simpson_step(F& f, Scalar a, Scalar b, Scalar fa, Scalar fm, Scalar fb, Scalar whole,
                    Scalar tol, int depth, bool& exhausted) {
  const Scalar m = (a + b) / 2;
  const Scalar lm = (a + m) / 2;
  const Scalar rm = (m + b) / 2;
  const Scalar flm = f(lm);
  const Scalar frm = f(rm);
  const Scalar left = (m - a) / 6 * (fa + 4 * flm + fm);
  const Scalar right = (b - m) / 6 * (fm + 4 * frm + fb);
  const Scalar delta = left + right - whole;
  if (std::fabs(delta) <= 15 * tol) return left + right + delta / 15;
  if (depth <= 0) {
    exhausted = true;
    return left + right + delta / 15;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, tol / 2, depth - 1, exhausted) +
         simpson_step(f, m, b, fm, frm, fb, right, tol / 2, depth - 1, exhausted);
}

}  // namespace detail

/// Adaptive Simpson integration of f over [a, b] to absolute tolerance
/// `abs_tol`, starting from `panels` equal panels. Throws NumericError when
/// the recursion depth runs out before the tolerance is met.
template <typename F, std::floating_point Scalar>
Scalar adaptive_simpson(F f, Scalar a, Scalar b, Scalar abs_tol, int max_depth = 40,
                        int panels = 32) {
  if (!(b > a)) return Scalar(0);
  const Scalar h = (b - a) / panels;
  const Scalar panel_tol = abs_tol / panels;
  bool exhausted = false;
  Scalar total = 0;
  Scalar fa = f(a);
  for (int i = 0; i < panels; ++i) {
    const Scalar lo = a + h * i;
    const Scalar hi = i + 1 == panels ? b : a + h * (i + 1);
    const Scalar fm = f((lo + hi) / 2);
    const Scalar fb = f(hi);
    const Scalar whole = (hi - lo) / 6 * (fa + 4 * fm + fb);
    total += detail::simpson_step(f, lo, hi, fa, fm, fb, whole, panel_tol, max_depth, exhausted);
    fa = fb;
  }
  if (exhausted) {
    std::ostringstream os;
    os << "adaptive_simpson: tolerance " << abs_tol << " not reached on [" << a << ", " << b << "]";
    throw NumericError(os.str());
  }
  return total;
}

}  // namespace gshift
