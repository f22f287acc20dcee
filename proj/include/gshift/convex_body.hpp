#pragma once

// Symmetric convex bodies: membership, support function
//   support(A, v) = sup { <z, v> : z in A },
// linear images, and a randomized symmetry/convexity check.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include "gshift/errors.hpp"
#include "gshift/matrix_core.hpp"
#include "gshift/random.hpp"
#include "gshift/simplex.hpp"

namespace gshift {

enum class Exactness { exact, upper_bound };

inline std::string_view to_string(Exactness e) noexcept {
  return e == Exactness::exact ? "exact" : "upper_bound";
}

/// Value of a support function, possibly +inf. `upper_bound` marks values
/// that may exceed the true supremum.
template <std::floating_point Scalar>
struct SupportValue {
  Scalar value = Scalar(0);
  Exactness exactness = Exactness::exact;

  bool is_infinite() const noexcept { return std::isinf(value); }
};

/// Orthogonal component tolerance, relative to |v|, for "v is parallel to the slab normal".
inline constexpr double kParallelTolerance = 1e-10;

template <std::floating_point Scalar>
class ConvexBody {
 public:
  using Matrix = MatrixX<Scalar>;
  using Vector = VectorX<Scalar>;

  /// {x : |<x, normal>| <= halfwidth}
  struct Slab {
    Direction<Scalar> normal;
    Scalar halfwidth;
  };
  /// {x : |x|_p <= radius}, p in [1, inf]
  struct LpBall {
    Eigen::Index dim;
    Scalar p;
    Scalar radius;
  };
  /// {x : x^T M x <= 1}
  struct Ellipsoid {
    Covariance<Scalar> shape;
  };
  /// {x : |<a_i, x>| <= b_i for all i}, rows of `normals` are the a_i
  struct HPolytope {
    Matrix normals;
    Vector bounds;
  };
  struct Intersection;
  /// {L x : x in base}
  struct LinearImage;

  using Variant = std::variant<Slab, LpBall, Ellipsoid, HPolytope, Intersection, LinearImage>;

  static ConvexBody slab(const Direction<Scalar>& normal, Scalar halfwidth) {
    if (!(halfwidth > Scalar(0)) || !std::isfinite(halfwidth)) {
      throw DomainError("slab: halfwidth must be positive and finite");
    }
    return ConvexBody(Slab{normal, halfwidth});
  }

  static ConvexBody lp_ball(Eigen::Index dim, Scalar p, Scalar radius) {
    if (dim < 1 || dim > kMaxDim) throw ShapeError("lp_ball: invalid dimension");
    if (!(p >= Scalar(1))) throw DomainError("lp_ball: p must lie in [1, inf]");
    if (!(radius > Scalar(0)) || !std::isfinite(radius)) {
      throw DomainError("lp_ball: radius must be positive and finite");
    }
    return ConvexBody(LpBall{dim, p, radius});
  }

  template <typename Derived>
  static ConvexBody ellipsoid(const Eigen::MatrixBase<Derived>& m) {
    return ConvexBody(Ellipsoid{Covariance<Scalar>(m)});
  }

  template <typename DerivedA, typename DerivedB>
  static ConvexBody h_polytope(const Eigen::MatrixBase<DerivedA>& normals,
                               const Eigen::MatrixBase<DerivedB>& bounds) {
    if (normals.rows() == 0 || normals.cols() == 0 || normals.cols() > kMaxDim) {
      throw ShapeError("h_polytope: need at least one constraint in a valid dimension");
    }
    detail::require_dim(bounds.size(), normals.rows(), "h_polytope: bounds");
    if (!normals.allFinite() || !bounds.allFinite()) throw ShapeError("h_polytope: non-finite entry");
    if ((bounds.array() <= Scalar(0)).any()) {
      throw DomainError("h_polytope: every bound b_i must be positive");
    }
    return ConvexBody(HPolytope{normals, bounds});
  }

  static ConvexBody intersection(std::vector<ConvexBody> parts) {
    if (parts.empty()) throw ShapeError("intersection: needs at least one part");
    for (const auto& part : parts) detail::require_dim(part.dim(), parts.front().dim(), "intersection");
    return ConvexBody(Intersection{std::move(parts)});
  }

  /// {L x : x in base}; an image of an image composes the maps.
  template <typename Derived>
  static ConvexBody linear_image(const ConvexBody& base, const Eigen::MatrixBase<Derived>& map);

  Eigen::Index dim() const {
    return std::visit(
        [](const auto& b) -> Eigen::Index {
          using T = std::decay_t<decltype(b)>;
          if constexpr (std::is_same_v<T, Slab>) return b.normal.dim();
          else if constexpr (std::is_same_v<T, LpBall>) return b.dim;
          else if constexpr (std::is_same_v<T, Ellipsoid>) return b.shape.dim();
          else if constexpr (std::is_same_v<T, HPolytope>) return b.normals.cols();
          else if constexpr (std::is_same_v<T, Intersection>) return b.parts.front().dim();
          else return b.map.rows();
        },
        *node_);
  }

  std::string_view kind() const {
    static constexpr std::string_view names[] = {"slab",       "lp_ball",      "ellipsoid",
                                                  "h_polytope", "intersection", "linear_image"};
    return names[node_->index()];
  }

  const Variant& variant() const noexcept { return *node_; }

 private:
  template <typename T>
  explicit ConvexBody(T body) : node_(std::make_shared<const Variant>(std::move(body))) {}

  std::shared_ptr<const Variant> node_;
};


template <std::floating_point Scalar>
struct ConvexBody<Scalar>::Intersection {
  std::vector<ConvexBody> parts;
};

template <std::floating_point Scalar>
struct ConvexBody<Scalar>::LinearImage {
  ConvexBody base;
  Matrix map;
  Matrix inverse;
};

template <std::floating_point Scalar>
template <typename Derived>
ConvexBody<Scalar> ConvexBody<Scalar>::linear_image(const ConvexBody& base,
                                                    const Eigen::MatrixBase<Derived>& map) {
  detail::require_square_finite(map, "linear_image");
  detail::require_dim(map.rows(), base.dim(), "linear_image");
  const Eigen::JacobiSVD<Matrix> svd(map);
  const auto& sv = svd.singularValues();
  if (!(sv.minCoeff() > Scalar(0)) || sv.minCoeff() < Scalar(kConditionFloor) * sv.maxCoeff()) {
    std::ostringstream os;
    os << "linear_image: map is singular or ill-conditioned (singular values in ["
       << sv.minCoeff() << ", " << sv.maxCoeff() << "])";
    throw DefinitenessError(os.str());
  }
  Matrix inverse = map.fullPivLu().inverse();
  if (const auto* inner = std::get_if<LinearImage>(&base.variant())) {
    return ConvexBody(LinearImage{inner->base, map * inner->map, inner->inverse * inverse});
  }
  return ConvexBody(LinearImage{base, map, std::move(inverse)});
}

namespace detail {

/// |x|_p with scaling against overflow; p may be +inf.
template <typename Derived>
typename Derived::Scalar lp_norm(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  const Scalar big = x.cwiseAbs().maxCoeff();
  if (std::isinf(p) || big == Scalar(0)) return big;
  if (p == Scalar(1)) return x.cwiseAbs().sum();
  if (p == Scalar(2)) return x.norm();
  return big * std::pow((x.cwiseAbs() / big).array().pow(p).sum(), Scalar(1) / p);
}

/// Hoelder conjugate exponent; 1 <-> inf.
template <std::floating_point Scalar>
Scalar conjugate_exponent(Scalar p) {
  if (std::isinf(p)) return Scalar(1);
  if (p == Scalar(1)) return std::numeric_limits<Scalar>::infinity();
  return p / (p - Scalar(1));
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace detail

/// Exact membership test.
template <std::floating_point Scalar, typename Derived>
bool contains(const ConvexBody<Scalar>& body, const Eigen::MatrixBase<Derived>& x) {
  using Body = ConvexBody<Scalar>;
  detail::require_dim(x.size(), body.dim(), "contains");
  return std::visit(
      detail::overloaded{
          [&](const typename Body::Slab& b) {
            return std::fabs(x.dot(b.normal.vector())) <= b.halfwidth;
          },
          [&](const typename Body::LpBall& b) { return detail::lp_norm(x, b.p) <= b.radius; },
          [&](const typename Body::Ellipsoid& b) {
            return quad_form(b.shape.matrix(), x) <= Scalar(1);
          },
          [&](const typename Body::HPolytope& b) {
            return ((b.normals * x).cwiseAbs().array() <= b.bounds.array()).all();
          },
          [&](const typename Body::Intersection& b) {
            return std::all_of(b.parts.begin(), b.parts.end(),
                               [&](const Body& part) { return contains(part, x); });
          },
          [&](const typename Body::LinearImage& b) {
            return contains(b.base, VectorX<Scalar>(b.inverse * x));
          }},
      body.variant());
}

/// Support function sup{<z, v> : z in body}. Intersections report the
/// minimum over their parts, flagged as an upper bound.
template <std::floating_point Scalar, typename Derived>
SupportValue<Scalar> support(const ConvexBody<Scalar>& body, const Eigen::MatrixBase<Derived>& v) {
  using Body = ConvexBody<Scalar>;
  using Value = SupportValue<Scalar>;
  detail::require_dim(v.size(), body.dim(), "support");
  if (!v.allFinite()) throw DomainError("support: direction must be finite");
  constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
  return std::visit(
      detail::overloaded{
          [&](const typename Body::Slab& b) -> Value {
            const auto& w = b.normal.vector();
            const Scalar along = v.dot(w);
            const Scalar orth = (v - along * w).norm();
            if (orth <= Scalar(kParallelTolerance) * v.norm()) {
              return {b.halfwidth * std::fabs(along), Exactness::exact};
            }
            return {inf, Exactness::exact};
          },
          [&](const typename Body::LpBall& b) -> Value {
            return {b.radius * detail::lp_norm(v, detail::conjugate_exponent(b.p)),
                    Exactness::exact};
          },
          [&](const typename Body::Ellipsoid& b) -> Value {
            return {std::sqrt(std::max(Scalar(0), v.dot(b.shape.solve(v)))), Exactness::exact};
          },
          [&](const typename Body::HPolytope& b) -> Value {
            const auto lp = maximize_symmetric_polytope(b.normals, b.bounds, v);
            if (lp.status == LpStatus::unbounded) return {inf, Exactness::exact};
            return {std::max(Scalar(0), lp.value), Exactness::exact};
          },
          [&](const typename Body::Intersection& b) -> Value {
            if (b.parts.size() == 1) return support(b.parts.front(), v);
            Scalar best = inf;
            for (const auto& part : b.parts) best = std::min(best, support(part, v).value);
            return {best, Exactness::upper_bound};
          },
          [&](const typename Body::LinearImage& b) -> Value {
            return support(b.base, VectorX<Scalar>(b.map.transpose() * v));
          }},
      body.variant());
}

/// A maximizer of <z, v> over the body when the closed form or LP provides
/// one; empty for unbounded directions and for intersections.
template <std::floating_point Scalar, typename Derived>
std::optional<VectorX<Scalar>> support_point(const ConvexBody<Scalar>& body,
                                             const Eigen::MatrixBase<Derived>& v) {
  using Body = ConvexBody<Scalar>;
  using Vector = VectorX<Scalar>;
  using Result = std::optional<Vector>;
  detail::require_dim(v.size(), body.dim(), "support_point");
  const Eigen::Index n = body.dim();
  if (v.norm() == Scalar(0)) return Vector::Zero(n);
  return std::visit(
      detail::overloaded{
          [&](const typename Body::Slab& b) -> Result {
            if (support(body, v).is_infinite()) return std::nullopt;
            const Scalar sign = v.dot(b.normal.vector()) >= Scalar(0) ? Scalar(1) : Scalar(-1);
            return Vector(sign * b.halfwidth * b.normal.vector());
          },
          [&](const typename Body::LpBall& b) -> Result {
            Vector x = Vector::Zero(n);
            if (std::isinf(b.p)) {
              for (Eigen::Index i = 0; i < n; ++i) x[i] = v[i] >= Scalar(0) ? b.radius : -b.radius;
            } else if (b.p == Scalar(1)) {
              Eigen::Index k = 0;
              v.cwiseAbs().maxCoeff(&k);
              x[k] = v[k] >= Scalar(0) ? b.radius : -b.radius;
            } else {
              const Scalar q = detail::conjugate_exponent(b.p);
              const Scalar dual = detail::lp_norm(v, q);
              for (Eigen::Index i = 0; i < n; ++i) {
                const Scalar mag = b.radius * std::pow(std::fabs(v[i]) / dual, q - Scalar(1));
                x[i] = v[i] >= Scalar(0) ? mag : -mag;
              }
            }
            return x;
          },
          [&](const typename Body::Ellipsoid& b) -> Result {
            const Vector y = b.shape.solve(v);
            return Vector(y / std::sqrt(v.dot(y)));
          },
          [&](const typename Body::HPolytope& b) -> Result {
            const auto lp = maximize_symmetric_polytope(b.normals, b.bounds, v);
            if (lp.status == LpStatus::unbounded) return std::nullopt;
            return lp.argmax;
          },
          [&](const typename Body::Intersection& b) -> Result {
            if (b.parts.size() == 1) return support_point(b.parts.front(), v);
            return std::nullopt;
          },
          [&](const typename Body::LinearImage& b) -> Result {
            auto x = support_point(b.base, Vector(b.map.transpose() * v));
            if (!x) return std::nullopt;
            return Vector(b.map * *x);
          }},
      body.variant());
}

/// The image {L x : x in body}. contains(result, x) == contains(body, L^{-1} x)
/// and support(result, v) == support(body, L^T v).
template <std::floating_point Scalar, typename Derived>
ConvexBody<Scalar> transform(const ConvexBody<Scalar>& body, const Eigen::MatrixBase<Derived>& map) {
  return ConvexBody<Scalar>::linear_image(body, map);
}

/// Typical size of a body: median finite support value over the coordinate
/// axes, or 1 when every axis is unbounded.
template <std::floating_point Scalar>
Scalar body_scale(const ConvexBody<Scalar>& body) {
  const Eigen::Index n = body.dim();
  std::vector<Scalar> finite;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto s = support(body, VectorX<Scalar>::Unit(n, i));
    if (!s.is_infinite() && s.value > Scalar(0)) finite.push_back(s.value);
  }
  if (finite.empty()) return Scalar(1);
  std::nth_element(finite.begin(), finite.begin() + finite.size() / 2, finite.end());
  return finite[finite.size() / 2];
}

struct SymmetryReport {
  std::size_t probes = 0;
  std::size_t contained = 0;
  std::size_t symmetry_violations = 0;
  std::size_t convexity_pairs = 0;
  std::size_t convexity_violations = 0;
  bool origin_contained = false;

  bool ok() const noexcept {
    return origin_contained && symmetry_violations == 0 && convexity_violations == 0;
  }
};

/// Randomized check that the body is symmetric and (midpoint) convex. Probes
/// are Gaussian with per-coordinate scale body_scale / sqrt(n).
template <std::floating_point Scalar>
SymmetryReport validate_symmetry(const ConvexBody<Scalar>& body, std::size_t probes,
                                 std::uint64_t seed) {
  if (probes == 0) throw DomainError("validate_symmetry: probes must be positive");
  const Eigen::Index n = body.dim();
  const Scalar scale = body_scale(body) / std::sqrt(Scalar(n));
  const NormalStream stream(seed, 0x5e11u);

  SymmetryReport report;
  report.probes = probes;
  report.origin_contained = contains(body, VectorX<Scalar>::Zero(n));
  Eigen::VectorXd z(n);
  std::optional<VectorX<Scalar>> previous;
  for (std::size_t i = 0; i < probes; ++i) {
    stream.fill(i, {z.data(), static_cast<std::size_t>(n)});
    const VectorX<Scalar> x = scale * z.cast<Scalar>();
    const bool in = contains(body, x);
    if (in != contains(body, VectorX<Scalar>(-x))) ++report.symmetry_violations;
    if (!in) continue;
    ++report.contained;
    if (previous) {
      ++report.convexity_pairs;
      if (!contains(body, VectorX<Scalar>((x + *previous) / Scalar(2)))) {
        ++report.convexity_violations;
      }
    }
    previous = x;
  }
  return report;
}

}  // namespace gshift
