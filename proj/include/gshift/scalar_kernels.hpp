#pragma once

// Scalar special functions: the standard normal law, the regularized lower
// incomplete gamma function, and the slab/ratio functions r_t(a), g_a(t),
// lambda_a(t) built on top of them.
//
// Everything here is a pure function templated on a floating-point Scalar.

#include <array>
#include <cmath>
#include <compare>
#include <concepts>
#include <limits>
#include <numbers>
#include <sstream>

#include "gshift/errors.hpp"

namespace gshift {

/// A half-width a in [0, +inf]. Infinity is an ordinary, comparable value.
template <std::floating_point Scalar>
class ExtendedHalfWidth {
 public:
  constexpr ExtendedHalfWidth() = default;

  explicit ExtendedHalfWidth(Scalar value) : value_(value) {
    if (!(value >= Scalar(0))) {
      std::ostringstream os;
      os << "half-width must be a nonnegative extended real, got " << value;
      throw DomainError(os.str());
    }
  }

  static ExtendedHalfWidth infinity() {
    return ExtendedHalfWidth(std::numeric_limits<Scalar>::infinity());
  }

  constexpr Scalar value() const noexcept { return value_; }
  constexpr bool is_infinite() const noexcept { return std::isinf(value_); }

  friend constexpr auto operator<=>(const ExtendedHalfWidth&, const ExtendedHalfWidth&) = default;

 private:
  Scalar value_ = Scalar(0);
};

/// Value and t-derivative of g_a(t) = Phi(a+t) - Phi(t-a).
template <std::floating_point Scalar>
struct SlabValue {
  Scalar value;
  Scalar derivative;
};

namespace detail {

template <std::floating_point Scalar>
inline constexpr Scalar kInvSqrt2 = std::numbers::sqrt2_v<Scalar> / Scalar(2);

template <std::floating_point Scalar>
inline constexpr Scalar kInvSqrt2Pi = std::numbers::inv_sqrtpi_v<Scalar> * kInvSqrt2<Scalar>;

/// Below this half-width r_t(a) uses the cosh limit form.
template <std::floating_point Scalar>
inline constexpr Scalar kTinyHalfWidth = Scalar(1e-7);

/// Below this half-width r_t(a) is integrated by Gauss-Legendre instead of
/// differencing tail probabilities.
template <std::floating_point Scalar>
inline constexpr Scalar kSmallHalfWidth = Scalar(0.1);

template <std::size_t N>
struct GaussLegendreRule {
  std::array<long double, N> nodes{};
  std::array<long double, N> weights{};
};

/// N-point Gauss-Legendre rule on [-1, 1] by Newton iteration on P_N.
template <std::size_t N>
const GaussLegendreRule<N>& gauss_legendre() {
  static const GaussLegendreRule<N> rule = [] {
    GaussLegendreRule<N> r;
    const long double pi = std::numbers::pi_v<long double>;
    for (std::size_t i = 0; i < (N + 1) / 2; ++i) {
      long double x = std::cos(pi * (static_cast<long double>(i) + 0.75L) /
                               (static_cast<long double>(N) + 0.5L));
      long double dp = 0;
      for (int iter = 0; iter < 100; ++iter) {
        long double p0 = 1, p1 = x;
        for (std::size_t k = 2; k <= N; ++k) {
          const long double pk = ((2.0L * k - 1.0L) * x * p1 - (k - 1.0L) * p0) / k;
          p0 = p1;
          p1 = pk;
        }
        dp = static_cast<long double>(N) * (x * p1 - p0) / (x * x - 1.0L);
        const long double dx = p1 / dp;
        x -= dx;
        if (std::fabs(dx) < 1e-19L) break;
      }
      const long double w = 2.0L / ((1.0L - x * x) * dp * dp);
      r.nodes[i] = -x;
      r.nodes[N - 1 - i] = x;
      r.weights[i] = w;
      r.weights[N - 1 - i] = w;
    }
    return r;
  }();
  return rule;
}

/// exp(-x^2/2) with the square split so that large |x| keeps full relative accuracy.
template <std::floating_point Scalar>
Scalar half_gaussian_exp(Scalar x) {
  x = std::fabs(x);
  const Scalar hi = std::trunc(x * Scalar(16)) / Scalar(16);
  const Scalar lo = x - hi;
  return std::exp(Scalar(-0.5) * hi * hi) * std::exp(Scalar(-0.5) * lo * (x + hi));
}

/// Gauss-Legendre evaluation of r_t(a) for small a:
/// r_t(a) = e^{-t^2/2} * int_0^a cosh(t x) e^{-x^2/2} dx / int_0^a e^{-x^2/2} dx.
template <std::floating_point Scalar>
Scalar ratio_small_halfwidth(Scalar t, Scalar a) {
  const auto& rule = gauss_legendre<24>();
  long double num = 0, den = 0;
  const long double half = static_cast<long double>(a) / 2;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const long double x = half * (rule.nodes[i] + 1.0L);
    const long double bell = std::exp(-0.5L * x * x);
    num += rule.weights[i] * std::cosh(static_cast<long double>(t) * x) * bell;
    den += rule.weights[i] * bell;
  }
  return static_cast<Scalar>(std::exp(-0.5L * static_cast<long double>(t) * t) * (num / den));
}

}  // namespace detail

/// Standard normal density.
template <std::floating_point Scalar>
Scalar std_normal_pdf(Scalar x) {
  return detail::kInvSqrt2Pi<Scalar> * detail::half_gaussian_exp(x);
}

/// Upper tail 1 - Phi(x), accurate in relative terms for large x.
template <std::floating_point Scalar>
Scalar std_normal_upper_tail(Scalar x) {
  return Scalar(0.5) * std::erfc(x * detail::kInvSqrt2<Scalar>);
}

/// Standard normal CDF through erfc, so the lower tail keeps relative accuracy.
template <std::floating_point Scalar>
Scalar std_normal_cdf(Scalar x) {
  return Scalar(0.5) * std::erfc(-x * detail::kInvSqrt2<Scalar>);
}

/// Phi(hi) - Phi(lo) for lo <= hi, differencing the tails on the side where
/// both terms are small.
template <std::floating_point Scalar>
Scalar std_normal_interval(Scalar lo, Scalar hi) {
  if (!(lo < hi)) return Scalar(0);
  if (lo >= Scalar(0)) return std_normal_upper_tail(lo) - std_normal_upper_tail(hi);
  if (hi <= Scalar(0)) return std_normal_upper_tail(-hi) - std_normal_upper_tail(-lo);
  return Scalar(1) - std_normal_upper_tail(hi) - std_normal_upper_tail(-lo);
}

/// Regularized lower incomplete gamma P(shape, x); P(k/2, y/2) is the
/// chi-square CDF with k degrees of freedom at y.
template <std::floating_point Scalar>
Scalar regularized_gamma_p(Scalar shape, Scalar x) {
  if (!(shape > Scalar(0))) throw DomainError("regularized_gamma_p: shape must be positive");
  if (!(x >= Scalar(0))) throw DomainError("regularized_gamma_p: x must be nonnegative");
  if (x == Scalar(0)) return Scalar(0);
  if (std::isinf(x)) return Scalar(1);

  constexpr int kMaxIter = 10000;
  constexpr Scalar eps = std::numeric_limits<Scalar>::epsilon();
  const Scalar log_prefactor = -x + shape * std::log(x) - std::lgamma(shape);

  if (x < shape + Scalar(1)) {
    Scalar term = Scalar(1) / shape;
    Scalar sum = term;
    Scalar ap = shape;
    for (int n = 0; n < kMaxIter; ++n) {
      ap += Scalar(1);
      term *= x / ap;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * eps) {
        return std::min(Scalar(1), sum * std::exp(log_prefactor));
      }
    }
    throw NumericError("regularized_gamma_p: series did not converge");
  }

  // Modified Lentz evaluation of the continued fraction for Q = 1 - P.
  constexpr Scalar tiny = std::numeric_limits<Scalar>::min() / eps;
  Scalar b = x + Scalar(1) - shape;
  Scalar c = Scalar(1) / tiny;
  Scalar d = Scalar(1) / b;
  Scalar h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const Scalar an = -Scalar(i) * (Scalar(i) - shape);
    b += Scalar(2);
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = Scalar(1) / d;
    const Scalar delta = d * c;
    h *= delta;
    if (std::fabs(delta - Scalar(1)) < eps) {
      return std::max(Scalar(0), Scalar(1) - std::exp(log_prefactor) * h);
    }
  }
  throw NumericError("regularized_gamma_p: continued fraction did not converge");
}

/// r_t(a) = (Phi(t+a) - Phi(t-a)) / (Phi(a) - Phi(-a)), with r_t(0) = e^{-t^2/2}
/// and r_t(inf) = 1. Nondecreasing in a, between e^{-t^2/2} and 1.
template <std::floating_point Scalar>
Scalar ratio_r(Scalar t, ExtendedHalfWidth<Scalar> a) {
  if (!(t >= Scalar(0))) throw DomainError("ratio_r: t must be nonnegative");
  const Scalar av = a.value();
  if (a.is_infinite() || t == Scalar(0)) return Scalar(1);
  if (av == Scalar(0)) return std::exp(Scalar(-0.5) * t * t);
  if (av < detail::kTinyHalfWidth<Scalar>) {
    return std::exp(Scalar(-0.5) * t * t) * std::cosh(t * av);
  }
  if (av < detail::kSmallHalfWidth<Scalar>) return detail::ratio_small_halfwidth(t, av);
  const Scalar num = std_normal_interval(t - av, t + av);
  const Scalar den = std::erf(av * detail::kInvSqrt2<Scalar>);
  return std::min(Scalar(1), num / den);
}

template <std::floating_point Scalar>
Scalar ratio_r(Scalar t, Scalar a) {
  return ratio_r(t, ExtendedHalfWidth<Scalar>(a));
}

/// g_a(t) = P(|Z - t| <= a) and its derivative phi(a+t) - phi(t-a).
template <std::floating_point Scalar>
SlabValue<Scalar> slab_g(ExtendedHalfWidth<Scalar> a, Scalar t) {
  if (a.is_infinite()) return {Scalar(1), Scalar(0)};
  const Scalar av = a.value();
  const Scalar s = std::fabs(t);
  const Scalar value = std_normal_interval(s - av, s + av);
  const Scalar derivative = std_normal_pdf(av + t) - std_normal_pdf(t - av);
  return {value, derivative};
}

template <std::floating_point Scalar>
SlabValue<Scalar> slab_g(Scalar a, Scalar t) {
  return slab_g(ExtendedHalfWidth<Scalar>(a), t);
}

/// lambda_a(t) = g_a(t) + g_a'(t) / t, which is nonnegative and decreasing in t > 0.
template <std::floating_point Scalar>
Scalar slab_lambda(Scalar a, Scalar t) {
  if (!(a > Scalar(0)) || std::isinf(a)) {
    throw DomainError("slab_lambda: a must be positive and finite");
  }
  if (!(t > Scalar(0))) throw DomainError("slab_lambda: t must be positive");
  const auto g = slab_g(a, t);
  return g.value + g.derivative / t;
}

}  // namespace gshift
