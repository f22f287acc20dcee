#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "gshift/random.hpp"
#include "gshift/verification.hpp"
#include "reference_values.hpp"
#include "test_support.hpp"

namespace ref = gshift::reference;
using gshift::Body;
using gshift::Cov;
using gshift::Dir;
using gshift::Layered;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMillion = 1000000;

bool within(const gshift::McEstimate& e, double want, double z = 4.0) {
  return std::fabs(e.value - want) <= z * e.std_error;
}

/// Restores the default thread count when a test case ends.
struct ThreadGuard {
  ~ThreadGuard() { gshift::set_default_threads(0); }
};

}  // namespace

TEST_CASE("Philox4x32-10 known answers") {
  using P = gshift::Philox4x32;
  CHECK(P::apply({0, 0, 0, 0}, {0, 0}) == P::Counter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(P::apply({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        P::Counter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(P::apply({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        P::Counter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("normal quantile inverts the cdf") {
  for (double p : {1e-300, 1e-100, 1e-20, 1e-8, 0.001, 0.02425, 0.1, 0.5, 0.7, 0.97575, 0.999999}) {
    const double x = gshift::std_normal_quantile(p);
    CAPTURE(p);
    CHECK(gshift::std_normal_cdf(x) == doctest::Approx(p).epsilon(1e-13));
  }
  CHECK(gshift::std_normal_quantile(0.5) == 0.0);
  const double top = gshift::std_normal_quantile(gshift::open_unit_interval(0xffffffff, 0xffffffff));
  CHECK(gshift::open_unit_interval(0xffffffff, 0xffffffff) < 1.0);
  CHECK(gshift::open_unit_interval(0, 0) > 0.0);
  CHECK(std::isfinite(top));
  CHECK(top > 8);
}

TEST_CASE("normal streams are addressable and independent") {
  const gshift::NormalStream a(42, 0), b(42, 1), c(43, 0);
  std::array<double, 5> x{}, y{}, z{}, again{};
  a.fill(7, x);
  b.fill(7, y);
  c.fill(7, z);
  a.fill(7, again);
  CHECK(x == again);
  CHECK(x != y);
  CHECK(x != z);
  // Coordinates of a longer draw extend a shorter one.
  std::array<double, 3> prefix{};
  a.fill(7, prefix);
  CHECK(prefix[2] == x[2]);
}

TEST_CASE("sample moments") {
  const auto x = gshift::sample_gaussian(Cov::identity(2), kMillion, 1);
  const VectorXd mean = x.rowwise().mean();
  const MatrixXd centered = x.colwise() - mean;
  const MatrixXd cov = centered * centered.transpose() / double(kMillion - 1);
  CHECK((cov - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() <= 5e-3);
  CHECK(mean.cwiseAbs().maxCoeff() <= 4 / std::sqrt(double(kMillion)));

  const auto y = gshift::sample_gaussian(Cov::diagonal(Vector2d(4, 9)), kMillion, 2);
  const VectorXd m2 = y.rowwise().mean();
  const VectorXd var = (y.colwise() - m2).rowwise().squaredNorm() / double(kMillion - 1);
  CHECK(std::fabs(var[0] - 4) <= 4 * 4 * std::sqrt(2.0 / kMillion));
  CHECK(std::fabs(var[1] - 9) <= 4 * 9 * std::sqrt(2.0 / kMillion));
  CHECK(std::fabs(m2[1]) <= 4 * 3 / std::sqrt(double(kMillion)));
}

TEST_CASE("estimates are bit-identical across thread counts") {
  ThreadGuard guard;
  std::mt19937_64 gen(5);
  const Cov cov(gshift::testing::random_spd(3, gen));
  const auto u = gshift::testing::random_direction(3, gen);
  const auto body = Body::lp_ball(3, 1.0, 1.4);
  const Layered w({{1.0, body}, {2.5, Body::lp_ball(3, 1.0, 0.7)}});
  const std::size_t n = 300001;

  gshift::set_default_threads(1);
  const auto p1 = gshift::estimate_shift_prob(cov, body, u, 0.6, n, 77);
  const auto e1 = gshift::estimate_layered_expectation(cov, w, u, 0.6, n, 77);
  const auto s1 = gshift::sample_gaussian(cov, 1000, 77);
  gshift::set_default_threads(4);
  const auto p4 = gshift::estimate_shift_prob(cov, body, u, 0.6, n, 77);
  const auto e4 = gshift::estimate_layered_expectation(cov, w, u, 0.6, n, 77);
  const auto s4 = gshift::sample_gaussian(cov, 1000, 77);

  CHECK(p1.value == p4.value);
  CHECK(p1.std_error == p4.std_error);
  CHECK(e1.value == e4.value);
  CHECK(e1.std_error == e4.std_error);
  CHECK(s1 == s4);
  CHECK(p1.seed.seed == 77);
  CHECK(p1.samples == n);
}

TEST_CASE("shift probability estimates") {
  const auto u = Dir::axis(2, 0);
  const auto slab = gshift::estimate_shift_prob(Cov::identity(2), Body::slab(u, 1.0), u, 1.0, kMillion, 11);
  CHECK(within(slab, ref::kPhiTwoMinusPhiZero));

  const auto ball = gshift::estimate_shift_prob(Cov::identity(2), Body::lp_ball(2, 2.0, 2.0), u, 0.0, kMillion, 12);
  CHECK(within(ball, ref::kBallN2R2));

  const auto huge = gshift::estimate_shift_prob(Cov::identity(2), Body::lp_ball(2, 2.0, 100.0), u, 1.0, 10000, 13);
  CHECK(huge.value == 1.0);
  CHECK(huge.std_error == 0.0);

  CHECK_THROWS_AS(gshift::estimate_shift_prob(Cov::identity(2), Body::slab(u, 1.0), u, -1.0, 10, 1), gshift::DomainError);
  CHECK_THROWS_AS(gshift::estimate_shift_prob(Cov::identity(2), Body::slab(u, 1.0), u, 1.0, 0, 1), gshift::DomainError);
}

TEST_CASE("property: slab estimates match the closed form") {
  std::mt19937_64 gen(19);
  std::uniform_real_distribution<double> a_dist(0.2, 2.5), t_dist(0.0, 2.5);
  for (int k = 0; k < 20; ++k) {
    const int n = 2 + k % 3;
    const auto u = gshift::testing::random_direction(n, gen);
    const double a = a_dist(gen), t = t_dist(gen);
    const auto e = gshift::estimate_shift_prob(Cov::identity(n), Body::slab(u, a), u, t, 200000, 100 + k);
    CAPTURE(k);
    CHECK(within(e, gshift::oracle_slab(a, t)));
  }
}

TEST_CASE("layered expectation estimates") {
  const auto u = Dir::axis(2, 1);
  const auto inner = Body::lp_ball(2, 2.0, 1.0);
  const auto outer = Body::lp_ball(2, 2.0, 2.0);

  const auto single = gshift::estimate_layered_expectation(Cov::identity(2), Layered({{1.0, outer}}), u, 0.5, 200000, 3);
  const auto plain = gshift::estimate_shift_prob(Cov::identity(2), outer, u, 0.5, 200000, 3);
  CHECK(single.value == doctest::Approx(plain.value).epsilon(1e-14));
  CHECK(single.std_error == doctest::Approx(plain.std_error).epsilon(1e-12));

  const Layered w({{0.5, outer}, {1.5, inner}});
  const auto base = gshift::estimate_layered_expectation(Cov::identity(2), w, u, 0.5, 200000, 4);
  const auto big = gshift::estimate_layered_expectation(Cov::identity(2), w.scaled(10.0), u, 0.5, 200000, 4);
  CHECK(big.value == doctest::Approx(10 * base.value).epsilon(1e-12));
  CHECK(big.std_error == doctest::Approx(10 * base.std_error).epsilon(1e-12));

  const auto centered = gshift::estimate_layered_expectation(Cov::identity(2), w, u, 0.0, kMillion, 5);
  const double want = 0.5 * (1 - std::exp(-2.0)) + 1.5 * (1 - std::exp(-0.5));
  CHECK(within(centered, want));
}

TEST_CASE("conditional center") {
  const auto u = Dir::axis(2, 0);
  const auto slab = Body::slab(u, 1.0);
  const auto zero = gshift::estimate_conditional_center(slab, u, 0.0, 200000, 6);
  CHECK(within(zero, 0.0));

  const auto one = gshift::estimate_conditional_center(slab, u, 1.0, kMillion, 7);
  CHECK(within(one, ref::kSlabCenterA1T1));
  CHECK(one.value <= 1.0 + 4 * one.std_error);
  CHECK(one.hits < one.samples);

  const auto ball = gshift::estimate_conditional_center(Body::lp_ball(3, 2.0, 1.0), Dir::axis(3, 2), 2.0, kMillion, 8);
  CHECK(ball.value <= 2.0 + 4 * ball.std_error);
  CHECK(ball.hits >= 10000);

  CHECK_THROWS_AS(gshift::estimate_conditional_center(Body::lp_ball(2, 2.0, 0.01), u, 6.0, 10000, 9),
                  gshift::InsufficientSamplesError);
}

TEST_CASE("log-derivative identity for shifted balls") {
  // -d/dt log P(Z in t u + B_R) equals the conditional center coordinate.
  const double h = 1e-4;
  for (double t : {0.5, 1.0}) {
    const double fd = -(std::log(gshift::oracle_ball(3, 1.0, t + h)) - std::log(gshift::oracle_ball(3, 1.0, t - h))) / (2 * h);
    const auto mc = gshift::estimate_conditional_center(Body::lp_ball(3, 2.0, 1.0), Dir::axis(3, 0), t, kMillion, 21);
    CAPTURE(t);
    CHECK(std::fabs(mc.value - fd) <= 4 * mc.std_error + 1e-5);
    CHECK(fd <= t);
  }
}

TEST_CASE("sandwich verdicts") {
  const auto u = Dir::axis(2, 0);
  const auto extremal = gshift::extremal_slab(Cov::identity(2), u, 1.0);
  const auto v = gshift::verify_sandwich(Cov::identity(2), extremal, u, 1.0, kMillion, 31);
  CHECK(v.pass);
  CHECK(std::fabs(v.upper_z) <= 4);
  CHECK(v.z_threshold == 4);

  std::mt19937_64 gen(37);
  const Cov cov(gshift::testing::random_spd(4, gen));
  const auto dir = gshift::testing::random_direction(4, gen);
  const auto cube = gshift::verify_sandwich(cov, Body::lp_ball(4, kInf, 1.0), dir, 1.0, kMillion, 32);
  CHECK(cube.pass);

  const auto still = gshift::verify_sandwich(Cov::identity(2), Body::lp_ball(2, 2.0, 1.0), u, 0.0, 200000, 33);
  CHECK(still.pass);
  CHECK(still.ratio == doctest::Approx(1).epsilon(0.02));

  const Layered w({{1.0, Body::lp_ball(2, 2.0, 2.0)}, {1.0, Body::lp_ball(2, 1.0, 1.0)}});
  CHECK(gshift::verify_sandwich(Cov::identity(2), w, u, 1.5, 200000, 34).pass);

  // Shrinking the analytic upper bound below the equality case must be caught.
  const auto broken = gshift::verify_sandwich(Cov::identity(2), extremal, u, 1.0, kMillion, 31, {4.0, 0.9});
  CHECK_FALSE(broken.pass);
  CHECK(broken.upper_z > 4);
  CHECK(broken.ratio == v.ratio);

  CHECK_THROWS_AS(gshift::verify_sandwich(Cov::identity(2), Body::lp_ball(2, 2.0, 1e-3), u, 0.1, 1000, 35),
                  gshift::InsufficientSamplesError);
}

TEST_CASE("derivative identity and floor") {
  const auto u = Dir::axis(2, 0);
  const Layered slab({{1.0, Body::slab(u, 1.0)}});
  const auto r = gshift::verify_derivative_identity(slab, u, 1.0, kMillion, 1e-2, 41);
  CHECK(r.pass);
  const double exact = gshift::slab_g(1.0, 1.0).derivative;
  CHECK(std::fabs(r.direct.value - exact) <= 4 * r.direct.std_error);
  CHECK(std::fabs(r.finite_difference.value - exact) <= 4 * r.finite_difference.std_error + 1e-3);

  const auto zero = gshift::verify_derivative_identity(slab, u, 0.0, 200000, 1e-2, 42);
  CHECK(zero.pass);
  CHECK(std::fabs(zero.direct.value) <= 4 * zero.direct.std_error);
  CHECK(zero.floor == 0.0);

  const Layered two({{0.5, Body::lp_ball(2, 2.0, 2.0)}, {1.0, Body::lp_ball(2, 2.0, 1.0)}});
  CHECK(gshift::verify_derivative_identity(two, Dir::normalized(Vector2d(1, 1)), 0.5, 200000, 1e-2, 43).pass);
  CHECK_THROWS_AS(gshift::verify_derivative_identity(slab, u, 1.0, 100, 0.0, 1), gshift::DomainError);
}

TEST_CASE("power estimates") {
  const auto u = Dir::axis(2, 0);
  const auto slab = Body::slab(u, 1.0);
  const auto p = gshift::estimate_power(Cov::identity(2), slab, u, 1.0, kMillion, 51);
  CHECK(within(p, ref::kPowerSlabA1Theta1));

  const double alpha = 1 - ref::kCentralOne;
  const auto null = gshift::estimate_power(Cov::identity(2), slab, u, 1e-12, kMillion, 52);
  CHECK(within(null, alpha));

  const auto env = gshift::power_envelope(Cov::identity(2), slab, u, 1.0, alpha);
  CHECK(p.value >= env.beta_lower - 4 * p.std_error);
  CHECK(p.value <= env.beta_upper + 4 * p.std_error);
  CHECK_THROWS_AS(gshift::estimate_power(Cov::identity(2), slab, u, 0.0, 10, 1), gshift::DomainError);
}

TEST_CASE("slab and ball oracles") {
  CHECK(std::fabs(gshift::oracle_slab(1.0, 1.0) - ref::kPhiTwoMinusPhiZero) <= 1e-15);
  CHECK(std::fabs(gshift::oracle_slab(1.0, 0.0) - ref::kCentralOne) <= 1e-15);
  for (double a : {0.3, 1.0, 2.0}) {
    for (double t : {0.5, 1.5}) {
      CHECK(gshift::oracle_slab(a, t) ==
            doctest::Approx(gshift::ratio_r(t, a) * gshift::oracle_slab(a, 0.0)).epsilon(1e-13));
    }
  }
  CHECK_THROWS_AS(gshift::oracle_slab(0.0, 1.0), gshift::DomainError);

  for (const auto& row : ref::kBallTable) {
    CAPTURE(row[0]);
    CAPTURE(row[1]);
    CAPTURE(row[2]);
    CHECK(std::fabs(gshift::oracle_ball(static_cast<int>(row[0]), row[1], row[2]) - row[3]) <= 1e-9);
  }
  CHECK(std::fabs(gshift::oracle_ball(2, 2.0, 0.0) - ref::kBallN2R2) <= 1e-9);
  const double far = gshift::oracle_ball(2, 1.0, 10.0);
  CHECK(far >= 0);
  CHECK(far <= ref::kUpperTailNine);
  CHECK_THROWS_AS(gshift::oracle_ball(1, 1.0, 0.0), gshift::DomainError);
}

TEST_CASE("ball oracle agrees with Monte Carlo") {
  const auto u = Dir::axis(3, 0);
  const double q = gshift::oracle_ball(3, 1.0, 0.0);
  const auto mc = gshift::estimate_shift_prob(Cov::identity(3), Body::lp_ball(3, 2.0, 1.0), u, 0.0, kMillion, 61);
  CHECK(within(mc, q));
}
