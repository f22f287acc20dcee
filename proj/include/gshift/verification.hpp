#pragma once

// Monte Carlo estimators and quadrature oracles used to check the shift
// bounds numerically. All estimators are deterministic functions of
// (seed, stream, count): samples are addressed by index through a
// counter-based generator and reduced chunk by chunk in a fixed order, so
// the thread count never changes a result.

#include <cstddef>
#include <cstdint>

#include "gshift/convex_body.hpp"
#include "gshift/matrix_core.hpp"
#include "gshift/shift_bounds.hpp"

namespace gshift {

using Cov = Covariance<double>;
using Body = ConvexBody<double>;
using Dir = Direction<double>;
using Layered = LayeredUnimodal<double>;

/// Samples per reduction chunk. Part of the determinism contract.
inline constexpr std::size_t kChunkSize = 1u << 15;

/// Worker threads used by the estimators: $GSHIFT_THREADS when set, else the hardware count.
unsigned default_threads();

/// Overrides default_threads() for the current process; 0 restores the default.
void set_default_threads(unsigned threads);

struct SeedRecord {
  std::uint64_t seed = 0;
  std::uint32_t stream = 0;
};

/// Stream ids used when an operation needs several independent sample streams.
namespace streams {
inline constexpr std::uint32_t primary = 0;
inline constexpr std::uint32_t numerator = 1;
inline constexpr std::uint32_t denominator = 2;
inline constexpr std::uint32_t finite_difference = 3;
inline constexpr std::uint32_t direct = 4;
inline constexpr std::uint32_t size = 5;
inline constexpr std::uint32_t power = 6;
}  // namespace streams

struct McEstimate {
  double value = 0;
  double std_error = 0;  ///< sample standard deviation / sqrt(number of averaged values)
  std::size_t samples = 0;
  std::size_t hits = 0;  ///< accepted samples for conditional estimates, else equal to samples
  SeedRecord seed;
};

/// X = L Z for sample indices [0, count) of the given stream; one column per sample.
Eigen::MatrixXd sample_gaussian(const Cov& cov, std::size_t count, std::uint64_t seed,
                                std::uint32_t stream = streams::primary);

/// P(X - t u in A).
McEstimate estimate_shift_prob(const Cov& cov, const Body& body, const Dir& u, double t,
                               std::size_t count, std::uint64_t seed,
                               std::uint32_t stream = streams::primary);

/// E w(X - t u), all layers evaluated on one shared sample stream.
McEstimate estimate_layered_expectation(const Cov& cov, const Layered& w, const Dir& u, double t,
                                        std::size_t count, std::uint64_t seed,
                                        std::uint32_t stream = streams::primary);

/// <u, E(Z | Z in t u + A)> for standard Z. The standard error is over the
/// accepted samples. Throws InsufficientSamplesError below 100 hits.
McEstimate estimate_conditional_center(const Body& body, const Dir& u, double t,
                                       std::size_t count, std::uint64_t seed,
                                       std::uint32_t stream = streams::primary);

/// P(X + theta u not in A), the power of the test rejecting iff Y is not in A.
McEstimate estimate_power(const Cov& cov, const Body& body, const Dir& u, double theta,
                          std::size_t count, std::uint64_t seed,
                          std::uint32_t stream = streams::power);

struct SandwichOptions {
  double z_threshold = 4.0;
  /// Multiplies the analytic upper bound before adjudication (fault injection).
  double upper_scale = 1.0;
};

struct SandwichVerdict {
  BoundReport<double> bounds;
  McEstimate numerator;
  McEstimate denominator;
  double ratio = 0;
  double ratio_std_error = 0;
  double lower_z = 0;  ///< (ratio - lower) / sigma; must be >= -z_threshold
  double upper_z = 0;  ///< (ratio - upper) / sigma; must be <= z_threshold
  double z_threshold = 4.0;
  bool pass = false;
};

/// Estimates P(X in t u + A) and P(X in A) on independent streams and checks
/// that their ratio lies in the analytic sandwich, with delta-method error.
SandwichVerdict verify_sandwich(const Cov& cov, const Body& body, const Dir& u, double t,
                                std::size_t count, std::uint64_t seed,
                                const SandwichOptions& options = {});

/// Same for E w(X - t u) / E w(X).
SandwichVerdict verify_sandwich(const Cov& cov, const Layered& w, const Dir& u, double t,
                                std::size_t count, std::uint64_t seed,
                                const SandwichOptions& options = {});

struct DerivativeReport {
  double t = 0;
  double step = 0;
  McEstimate finite_difference;  ///< (E w(Z-(t+h)u) - E w(Z-(t-h)u)) / 2h, common random numbers
  McEstimate direct;             ///< -<u, E Z w(Z - t u)>, independent stream
  McEstimate current;            ///< E w(Z - t u), on the finite-difference stream
  double difference = 0;
  double tolerance = 0;  ///< z * combined sigma + discretization allowance
  double floor = 0;      ///< -t E w(Z - t u)
  double floor_margin_fd = 0;      ///< finite_difference - floor + z * sigma
  double floor_margin_direct = 0;  ///< direct - floor + z * sigma
  bool identity_ok = false;
  bool floor_ok = false;
  bool pass = false;
};

struct DerivativeOptions {
  double z_threshold = 4.0;
  double discretization_allowance = 1e-3;
};

/// Checks d/dt E w(Z - t u) = -<u, E Z w(Z - t u)> and the floor -t E w(Z - t u).
DerivativeReport verify_derivative_identity(const Layered& w, const Dir& u, double t,
                                            std::size_t count, double step, std::uint64_t seed,
                                            const DerivativeOptions& options = {});

/// Exact P(|Z - t| <= a) for standard normal Z.
double oracle_slab(double a, double t);

/// gamma_n(t u + B_R) by adaptive Simpson over the first coordinate against
/// the chi-square(n-1) CDF of the orthogonal cross-section, to 1e-10.
double oracle_ball(int n, double radius, double t);

}  // namespace gshift
