#pragma once

// Two-sided bounds on how much a centered Gaussian measure can lose when a
// symmetric convex set (or an even unimodal weight) is shifted by t*u:
//
//   exp(-t^2 <u, Sigma^{-1} u> / 2)
//     <= P(X in t u + A) / P(X in A)
//     <= r_{t |Sigma^{-1/2} u|}(a),   a = support(A, Sigma^{-1} u) / |Sigma^{-1/2} u|,
//
// plus the derivative floor, the conditional-center ceiling, the power
// envelope of the test "reject iff Y not in A", and the slabs attaining the
// upper bound.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <sstream>
#include <vector>

#include "gshift/convex_body.hpp"
#include "gshift/errors.hpp"
#include "gshift/matrix_core.hpp"
#include "gshift/random.hpp"
#include "gshift/scalar_kernels.hpp"

namespace gshift {

/// Even unimodal weight w(x) = sum_k c_k 1[x in A_k] with A_1 ⊇ A_2 ⊇ ... ⊇ A_K.
template <std::floating_point Scalar>
class LayeredUnimodal {
 public:
  struct Layer {
    Scalar weight;
    ConvexBody<Scalar> body;
  };

  /// Validates weights and nesting. Nesting is probed with `probes` Gaussian
  /// points per layer pair and a tenth as many support directions.
  explicit LayeredUnimodal(std::vector<Layer> layers, std::size_t probes = 2000,
                           std::uint64_t seed = 0x6c61796572ull)
      : layers_(std::move(layers)) {
    if (layers_.empty()) throw DomainError("layered weight: needs at least one layer");
    const Eigen::Index n = layers_.front().body.dim();
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& layer = layers_[k];
      if (!(layer.weight > Scalar(0)) || !std::isfinite(layer.weight)) {
        std::ostringstream os;
        os << "layered weight: layer " << k << " weight must be positive and finite";
        throw DomainError(os.str());
      }
      detail::require_dim(layer.body.dim(), n, "layered weight");
    }
    for (std::size_t k = 0; k + 1 < layers_.size(); ++k) check_nested(k, probes, seed);
  }

  Eigen::Index dim() const { return layers_.front().body.dim(); }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  /// Support set {w > 0}.
  const ConvexBody<Scalar>& outer() const noexcept { return layers_.front().body; }

  template <typename Derived>
  Scalar operator()(const Eigen::MatrixBase<Derived>& x) const {
    Scalar total = 0;
    for (const auto& layer : layers_) {
      if (!contains(layer.body, x)) break;
      total += layer.weight;
    }
    return total;
  }

  /// Same bodies with every weight multiplied by `factor`.
  LayeredUnimodal scaled(Scalar factor) const {
    if (!(factor > Scalar(0))) throw DomainError("layered weight: scale factor must be positive");
    LayeredUnimodal copy = *this;
    for (auto& layer : copy.layers_) layer.weight *= factor;
    return copy;
  }

 private:
  void check_nested(std::size_t k, std::size_t probes, std::uint64_t seed) const {
    const auto& outer_body = layers_[k].body;
    const auto& inner_body = layers_[k + 1].body;
    const Eigen::Index n = dim();
    const Scalar scale = body_scale(inner_body) / std::sqrt(Scalar(n));
    const NormalStream stream(seed, static_cast<std::uint32_t>(k));
    Eigen::VectorXd z(n);
    auto fail = [&](const char* why) {
      std::ostringstream os;
      os << "layered weight: layer " << k + 1 << " is not nested in layer " << k << " (" << why
         << ")";
      throw DomainError(os.str());
    };
    for (std::size_t i = 0; i < probes; ++i) {
      stream.fill(i, {z.data(), static_cast<std::size_t>(n)});
      const VectorX<Scalar> x = scale * z.cast<Scalar>();
      if (contains(inner_body, x) && !contains(outer_body, x)) fail("member outside outer layer");
    }
    for (std::size_t i = 0; i < probes / 10 + 1; ++i) {
      stream.fill(probes + i, {z.data(), static_cast<std::size_t>(n)});
      const VectorX<Scalar> v = z.cast<Scalar>();
      const auto inner = support(inner_body, v);
      if (inner.exactness != Exactness::exact) continue;
      const auto outer = support(outer_body, v);
      if (inner.value > outer.value + Scalar(1e-8)) fail("support dominance");
    }
  }

  std::vector<Layer> layers_;
};

template <std::floating_point Scalar>
struct ShiftExponent {
  ExtendedHalfWidth<Scalar> a;
  Exactness exactness = Exactness::exact;
};

/// Evaluated sandwich for one (Sigma, A or w, u, t) query.
template <std::floating_point Scalar>
struct BoundReport {
  Scalar t = 0;
  Scalar mahalanobis = 1;
  ExtendedHalfWidth<Scalar> exponent_a;
  Exactness exponent_exactness = Exactness::exact;
  Scalar lower = 1;
  Scalar upper = 1;
};

/// Envelope for the power of the test rejecting iff Y is not in A.
template <std::floating_point Scalar>
struct PowerReport {
  Scalar theta = 0;
  Scalar alpha = 0;
  Scalar beta_upper = 0;
  Scalar beta_lower = 0;
};

/// a = support(A, Sigma^{-1} u) / |Sigma^{-1/2} u|, carrying the support's exactness flag.
template <std::floating_point Scalar>
ShiftExponent<Scalar> shift_exponent(const Covariance<Scalar>& cov, const ConvexBody<Scalar>& body,
                                     const Direction<Scalar>& u) {
  detail::require_dim(body.dim(), cov.dim(), "shift_exponent");
  detail::require_dim(u.dim(), cov.dim(), "shift_exponent");
  const Scalar m = mahalanobis_norm(cov, u);
  const auto s = support(body, VectorX<Scalar>(cov.inverse() * u.vector()));
  if (s.is_infinite()) return {ExtendedHalfWidth<Scalar>::infinity(), s.exactness};
  return {ExtendedHalfWidth<Scalar>(s.value / m), s.exactness};
}

namespace detail {

template <std::floating_point Scalar>
BoundReport<Scalar> make_bound_report(Scalar t, Scalar m, const ShiftExponent<Scalar>& e) {
  if (!(t >= Scalar(0)) || !std::isfinite(t)) throw DomainError("bounds: t must be finite and >= 0");
  const Scalar s = t * m;
  BoundReport<Scalar> report;
  report.t = t;
  report.mahalanobis = m;
  report.exponent_a = e.a;
  report.exponent_exactness = e.exactness;
  report.lower = std::exp(Scalar(-0.5) * s * s);
  report.upper = ratio_r(s, e.a);
  return report;
}

}  // namespace detail

/// Bounds on P(X in t u + A) / P(X in A).
template <std::floating_point Scalar>
BoundReport<Scalar> ratio_bounds_set(const Covariance<Scalar>& cov, const ConvexBody<Scalar>& body,
                                     const Direction<Scalar>& u, Scalar t) {
  if (!(t >= Scalar(0))) throw DomainError("ratio_bounds_set: t must be nonnegative");
  return detail::make_bound_report(t, mahalanobis_norm(cov, u), shift_exponent(cov, body, u));
}

/// Bounds on E w(X - t u) / E w(X); only the support set of w matters.
template <std::floating_point Scalar>
BoundReport<Scalar> ratio_bounds_layered(const Covariance<Scalar>& cov,
                                         const LayeredUnimodal<Scalar>& w,
                                         const Direction<Scalar>& u, Scalar t) {
  return ratio_bounds_set(cov, w.outer(), u, t);
}

/// -t <u, Sigma^{-1} u> E w(X - t u): lower bound on d/dt E w(X - t u).
template <std::floating_point Scalar>
Scalar derivative_floor(const Covariance<Scalar>& cov, const Direction<Scalar>& u, Scalar t,
                        Scalar current) {
  if (!(t >= Scalar(0))) throw DomainError("derivative_floor: t must be nonnegative");
  if (!(current >= Scalar(0))) throw DomainError("derivative_floor: current value must be >= 0");
  return -t * quad_form(cov.inverse(), u.vector()) * current;
}

/// Ceiling on <u, E(Z | Z in t u + A)> for standard Z and symmetric convex A.
template <std::floating_point Scalar>
Scalar conditional_coordinate_ceiling(Scalar t) {
  if (!(t >= Scalar(0))) throw DomainError("conditional_coordinate_ceiling: t must be >= 0");
  return t;
}

/// Power envelope at alternative mean theta*u for a test of size alpha.
template <std::floating_point Scalar>
PowerReport<Scalar> power_envelope(const Covariance<Scalar>& cov, const ConvexBody<Scalar>& body,
                                   const Direction<Scalar>& u, Scalar theta, Scalar alpha) {
  if (!(theta > Scalar(0)) || !std::isfinite(theta)) {
    throw DomainError("power_envelope: theta must be positive and finite");
  }
  if (!(alpha > Scalar(0) && alpha < Scalar(1))) {
    throw DomainError("power_envelope: alpha must lie in (0, 1)");
  }
  const auto bounds = ratio_bounds_set(cov, body, u, theta);
  PowerReport<Scalar> report;
  report.theta = theta;
  report.alpha = alpha;
  report.beta_upper = Scalar(1) - bounds.lower * (Scalar(1) - alpha);
  report.beta_lower = Scalar(1) - bounds.upper * (Scalar(1) - alpha);
  // Only rounding can break alpha <= beta_lower <= beta_upper.
  constexpr Scalar slack = Scalar(1e-12);
  if (report.beta_lower < alpha - slack || report.beta_lower > report.beta_upper + slack) {
    std::ostringstream os;
    os << "power_envelope: broken chain alpha=" << alpha << " lower=" << report.beta_lower
       << " upper=" << report.beta_upper;
    throw NumericError(os.str());
  }
  report.beta_lower = std::clamp(report.beta_lower, alpha, report.beta_upper);
  return report;
}

/// Body attaining the upper bound: the slab |<z, u>| <= a when Sigma = I,
/// otherwise Sigma^{1/2} applied to the slab with normal Sigma^{-1/2}u/|Sigma^{-1/2}u|.
template <std::floating_point Scalar>
ConvexBody<Scalar> extremal_slab(const Covariance<Scalar>& cov, const Direction<Scalar>& u,
                                 Scalar a) {
  if (!(a > Scalar(0)) || !std::isfinite(a)) {
    throw DomainError("extremal_slab: a must be positive and finite");
  }
  detail::require_dim(u.dim(), cov.dim(), "extremal_slab");
  if (cov.matrix().isIdentity(Scalar(0))) return ConvexBody<Scalar>::slab(u, a);
  const auto normal = Direction<Scalar>::normalized(cov.inv_sqrt() * u.vector());
  return transform(ConvexBody<Scalar>::slab(normal, a), cov.sqrt());
}

/// The same query in whitened coordinates X~ = Sigma^{-1/2} X.
template <std::floating_point Scalar>
struct WhitenedQuery {
  ConvexBody<Scalar> body;
  Direction<Scalar> u;
  Scalar t;
};

template <std::floating_point Scalar>
WhitenedQuery<Scalar> whiten(const Covariance<Scalar>& cov, const ConvexBody<Scalar>& body,
                             const Direction<Scalar>& u, Scalar t) {
  const Scalar m = mahalanobis_norm(cov, u);
  return {transform(body, cov.inv_sqrt()), Direction<Scalar>::normalized(cov.inv_sqrt() * u.vector()),
          t * m};
}

}  // namespace gshift
