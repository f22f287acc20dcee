#include "gshift/verification.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>
#include <vector>

#include "gshift/quadrature.hpp"
#include "gshift/random.hpp"
#include "gshift/scalar_kernels.hpp"

namespace gshift {

namespace {

std::atomic<unsigned> g_thread_override{0};

/// Running mean and centered second moment, mergeable in a fixed order.
struct Moments {
  double n = 0;
  double mean = 0;
  double m2 = 0;

  void push(double x) {
    n += 1;
    const double delta = x - mean;
    mean += delta / n;
    m2 += delta * (x - mean);
  }

  void merge(const Moments& other) {
    if (other.n == 0) return;
    if (n == 0) {
      *this = other;
      return;
    }
    const double total = n + other.n;
    const double delta = other.mean - mean;
    mean += delta * other.n / total;
    m2 += other.m2 + delta * delta * n * other.n / total;
    n = total;
  }

  double std_error() const { return n > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0; }
};

/// Runs `work(begin, end)` over fixed chunks of [0, count) on up to
/// default_threads() workers; results come back indexed by chunk.
template <typename Result, typename Work>
std::vector<Result> run_chunks(std::size_t count, Work work) {
  const std::size_t chunks = (count + kChunkSize - 1) / kChunkSize;
  std::vector<Result> results(chunks);
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(default_threads(), std::max<std::size_t>(chunks, 1)));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      const std::size_t begin = c * kChunkSize;
      results[c] = work(begin, std::min(count, begin + kChunkSize));
    }
  };
  if (workers <= 1) {
    loop();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(loop);
  }
  return results;
}

/// Draws X = L Z for a given sample index into caller-owned buffers.
class GaussianDraw {
 public:
  GaussianDraw(const Cov& cov, std::uint64_t seed, std::uint32_t stream)
      : lower_(cov.cholesky_factor()), stream_(seed, stream), z_(cov.dim()), x_(cov.dim()),
        identity_(cov.matrix().isIdentity(0.0)) {}

  const Eigen::VectorXd& operator()(std::uint64_t index) {
    stream_.fill(index, {z_.data(), static_cast<std::size_t>(z_.size())});
    if (identity_) return z_;
    x_.noalias() = lower_.triangularView<Eigen::Lower>() * z_;
    return x_;
  }

 private:
  Eigen::MatrixXd lower_;
  NormalStream stream_;
  Eigen::VectorXd z_;
  Eigen::VectorXd x_;
  bool identity_;
};

void require_count(std::size_t count) {
  if (count == 0) throw DomainError("Monte Carlo: sample count must be positive");
}

void require_shift(double t, const char* what) {
  if (!(t >= 0) || !std::isfinite(t)) {
    throw DomainError(std::string(what) + ": shift must be finite and nonnegative");
  }
}

McEstimate bernoulli_estimate(std::size_t hits, std::size_t count, SeedRecord seed) {
  McEstimate est;
  est.samples = count;
  est.hits = count;
  est.seed = seed;
  const double p = static_cast<double>(hits) / static_cast<double>(count);
  est.value = p;
  est.std_error = count > 1 ? std::sqrt(p * (1 - p) / static_cast<double>(count - 1)) : 0.0;
  return est;
}

McEstimate moments_estimate(const Moments& m, std::size_t count, SeedRecord seed) {
  McEstimate est;
  est.samples = count;
  est.hits = static_cast<std::size_t>(m.n);
  est.seed = seed;
  est.value = m.mean;
  est.std_error = m.std_error();
  return est;
}

Moments reduce(const std::vector<Moments>& parts) {
  Moments total;
  for (const auto& part : parts) total.merge(part);
  return total;
}

double z_score(double diff, double sigma) {
  if (sigma > 0) return diff / sigma;
  if (diff == 0) return 0;
  return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

SandwichVerdict adjudicate(const BoundReport<double>& bounds, const McEstimate& num,
                           const McEstimate& den, std::size_t count,
                           const SandwichOptions& options) {
  if (den.value < 10.0 / static_cast<double>(count)) {
    std::ostringstream os;
    os << "verify_sandwich: denominator estimate " << den.value << " below 10/" << count;
    throw InsufficientSamplesError(os.str());
  }
  SandwichVerdict v;
  v.bounds = bounds;
  v.bounds.upper = bounds.upper * options.upper_scale;
  v.numerator = num;
  v.denominator = den;
  v.z_threshold = options.z_threshold;
  v.ratio = num.value / den.value;
  // Delta method for p1 / p0 with independent estimates.
  const double d2 = den.value * den.value;
  v.ratio_std_error = std::sqrt(num.std_error * num.std_error / d2 +
                                num.value * num.value * den.std_error * den.std_error / (d2 * d2));
  v.lower_z = z_score(v.ratio - v.bounds.lower, v.ratio_std_error);
  v.upper_z = z_score(v.ratio - v.bounds.upper, v.ratio_std_error);
  v.pass = v.lower_z >= -options.z_threshold && v.upper_z <= options.z_threshold;
  return v;
}

}  // namespace

unsigned default_threads() {
  if (const unsigned forced = g_thread_override.load(); forced > 0) return forced;
  if (const char* env = std::getenv("GSHIFT_THREADS")) {
    const long value = std::strtol(env, nullptr, 10);
    if (value > 0) return static_cast<unsigned>(value);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_default_threads(unsigned threads) { g_thread_override = threads; }

Eigen::MatrixXd sample_gaussian(const Cov& cov, std::size_t count, std::uint64_t seed,
                                std::uint32_t stream) {
  require_count(count);
  Eigen::MatrixXd out(cov.dim(), static_cast<Eigen::Index>(count));
  run_chunks<int>(count, [&](std::size_t begin, std::size_t end) {
    GaussianDraw draw(cov, seed, stream);
    for (std::size_t i = begin; i < end; ++i) out.col(static_cast<Eigen::Index>(i)) = draw(i);
    return 0;
  });
  return out;
}

McEstimate estimate_shift_prob(const Cov& cov, const Body& body, const Dir& u, double t,
                               std::size_t count, std::uint64_t seed, std::uint32_t stream) {
  require_count(count);
  require_shift(t, "estimate_shift_prob");
  detail::require_dim(body.dim(), cov.dim(), "estimate_shift_prob");
  detail::require_dim(u.dim(), cov.dim(), "estimate_shift_prob");
  const Eigen::VectorXd shift = t * u.vector();
  const auto hits = run_chunks<std::size_t>(count, [&](std::size_t begin, std::size_t end) {
    GaussianDraw draw(cov, seed, stream);
    Eigen::VectorXd y(cov.dim());
    std::size_t h = 0;
    for (std::size_t i = begin; i < end; ++i) {
      y = draw(i) - shift;
      h += contains(body, y) ? 1 : 0;
    }
    return h;
  });
  std::size_t total = 0;
  for (const auto h : hits) total += h;
  return bernoulli_estimate(total, count, {seed, stream});
}

McEstimate estimate_layered_expectation(const Cov& cov, const Layered& w, const Dir& u, double t,
                                        std::size_t count, std::uint64_t seed,
                                        std::uint32_t stream) {
  require_count(count);
  require_shift(t, "estimate_layered_expectation");
  detail::require_dim(w.dim(), cov.dim(), "estimate_layered_expectation");
  detail::require_dim(u.dim(), cov.dim(), "estimate_layered_expectation");
  const Eigen::VectorXd shift = t * u.vector();
  const auto parts = run_chunks<Moments>(count, [&](std::size_t begin, std::size_t end) {
    GaussianDraw draw(cov, seed, stream);
    Eigen::VectorXd y(cov.dim());
    Moments m;
    for (std::size_t i = begin; i < end; ++i) {
      y = draw(i) - shift;
      m.push(w(y));
    }
    return m;
  });
  auto est = moments_estimate(reduce(parts), count, {seed, stream});
  est.hits = count;
  return est;
}

McEstimate estimate_conditional_center(const Body& body, const Dir& u, double t,
                                       std::size_t count, std::uint64_t seed,
                                       std::uint32_t stream) {
  require_count(count);
  require_shift(t, "estimate_conditional_center");
  detail::require_dim(u.dim(), body.dim(), "estimate_conditional_center");
  const auto identity = Cov::identity(body.dim());
  const Eigen::VectorXd shift = t * u.vector();
  const auto parts = run_chunks<Moments>(count, [&](std::size_t begin, std::size_t end) {
    GaussianDraw draw(identity, seed, stream);
    Eigen::VectorXd y(body.dim());
    Moments m;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& z = draw(i);
      y = z - shift;
      if (contains(body, y)) m.push(z.dot(u.vector()));
    }
    return m;
  });
  const Moments total = reduce(parts);
  if (total.n < 100) {
    std::ostringstream os;
    os << "estimate_conditional_center: only " << total.n << " of " << count
       << " samples fell in the shifted body (need >= 100)";
    throw InsufficientSamplesError(os.str());
  }
  return moments_estimate(total, count, {seed, stream});
}

McEstimate estimate_power(const Cov& cov, const Body& body, const Dir& u, double theta,
                          std::size_t count, std::uint64_t seed, std::uint32_t stream) {
  require_count(count);
  if (!(theta > 0) || !std::isfinite(theta)) {
    throw DomainError("estimate_power: theta must be positive and finite");
  }
  detail::require_dim(body.dim(), cov.dim(), "estimate_power");
  detail::require_dim(u.dim(), cov.dim(), "estimate_power");
  const Eigen::VectorXd mean = theta * u.vector();
  const auto rejections = run_chunks<std::size_t>(count, [&](std::size_t begin, std::size_t end) {
    GaussianDraw draw(cov, seed, stream);
    Eigen::VectorXd y(cov.dim());
    std::size_t r = 0;
    for (std::size_t i = begin; i < end; ++i) {
      y = draw(i) + mean;
      r += contains(body, y) ? 0 : 1;
    }
    return r;
  });
  std::size_t total = 0;
  for (const auto r : rejections) total += r;
  return bernoulli_estimate(total, count, {seed, stream});
}

SandwichVerdict verify_sandwich(const Cov& cov, const Body& body, const Dir& u, double t,
                                std::size_t count, std::uint64_t seed,
                                const SandwichOptions& options) {
  const auto bounds = ratio_bounds_set(cov, body, u, t);
  const auto num = estimate_shift_prob(cov, body, u, t, count, seed, streams::numerator);
  const auto den = estimate_shift_prob(cov, body, u, 0.0, count, seed, streams::denominator);
  return adjudicate(bounds, num, den, count, options);
}

SandwichVerdict verify_sandwich(const Cov& cov, const Layered& w, const Dir& u, double t,
                                std::size_t count, std::uint64_t seed,
                                const SandwichOptions& options) {
  const auto bounds = ratio_bounds_layered(cov, w, u, t);
  const auto num = estimate_layered_expectation(cov, w, u, t, count, seed, streams::numerator);
  const auto den = estimate_layered_expectation(cov, w, u, 0.0, count, seed, streams::denominator);
  return adjudicate(bounds, num, den, count, options);
}

DerivativeReport verify_derivative_identity(const Layered& w, const Dir& u, double t,
                                            std::size_t count, double step, std::uint64_t seed,
                                            const DerivativeOptions& options) {
  require_count(count);
  require_shift(t, "verify_derivative_identity");
  if (!(step > 0) || !std::isfinite(step)) {
    throw DomainError("verify_derivative_identity: step must be positive");
  }
  detail::require_dim(u.dim(), w.dim(), "verify_derivative_identity");
  const auto identity = Cov::identity(w.dim());
  const Eigen::VectorXd& dir = u.vector();

  struct FdParts {
    Moments fd;
    Moments value;
  };
  const auto fd_parts = run_chunks<FdParts>(count, [&](std::size_t begin, std::size_t end) {
    GaussianDraw draw(identity, seed, streams::finite_difference);
    Eigen::VectorXd y(w.dim());
    FdParts parts;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& z = draw(i);
      y = z - (t + step) * dir;
      const double ahead = w(y);
      y = z - (t - step) * dir;
      const double behind = w(y);
      y = z - t * dir;
      parts.fd.push((ahead - behind) / (2 * step));
      parts.value.push(w(y));
    }
    return parts;
  });
  Moments fd, value;
  for (const auto& p : fd_parts) {
    fd.merge(p.fd);
    value.merge(p.value);
  }

  const auto direct_parts = run_chunks<Moments>(count, [&](std::size_t begin, std::size_t end) {
    GaussianDraw draw(identity, seed, streams::direct);
    Eigen::VectorXd y(w.dim());
    Moments m;
    for (std::size_t i = begin; i < end; ++i) {
      const auto& z = draw(i);
      y = z - t * dir;
      m.push(-z.dot(dir) * w(y));
    }
    return m;
  });

  DerivativeReport r;
  r.t = t;
  r.step = step;
  r.finite_difference = moments_estimate(fd, count, {seed, streams::finite_difference});
  r.current = moments_estimate(value, count, {seed, streams::finite_difference});
  r.direct = moments_estimate(reduce(direct_parts), count, {seed, streams::direct});
  r.finite_difference.hits = r.current.hits = r.direct.hits = count;

  const double z = options.z_threshold;
  const double s_fd = r.finite_difference.std_error;
  const double s_dir = r.direct.std_error;
  const double s_cur = t * r.current.std_error;
  r.difference = r.finite_difference.value - r.direct.value;
  r.tolerance = z * std::hypot(s_fd, s_dir) + options.discretization_allowance;
  r.identity_ok = std::fabs(r.difference) <= r.tolerance;

  r.floor = derivative_floor(identity, u, t, std::max(0.0, r.current.value));
  r.floor_margin_fd = r.finite_difference.value - r.floor + z * std::hypot(s_fd, s_cur);
  r.floor_margin_direct = r.direct.value - r.floor + z * std::hypot(s_dir, s_cur);
  r.floor_ok = r.floor_margin_fd >= 0 && r.floor_margin_direct >= 0;
  r.pass = r.identity_ok && r.floor_ok;
  return r;
}

double oracle_slab(double a, double t) {
  if (!(a > 0) || !std::isfinite(a)) throw DomainError("oracle_slab: a must be positive and finite");
  return slab_g(a, t).value;
}

double oracle_ball(int n, double radius, double t) {
  if (n < 2) throw DomainError("oracle_ball: dimension must be at least 2");
  if (!(radius > 0) || !std::isfinite(radius)) throw DomainError("oracle_ball: radius must be positive");
  require_shift(t, "oracle_ball");
  const double shape = 0.5 * (n - 1);
  // x = R sin(phi) removes the square-root edge behaviour of the cross-section.
  const auto integrand = [&](double phi) {
    const double c = std::cos(phi);
    if (c <= 0) return 0.0;
    const double x = radius * std::sin(phi);
    const double rc = radius * c;
    return std_normal_pdf(x + t) * regularized_gamma_p(shape, 0.5 * rc * rc) * rc;
  };
  constexpr double half_pi = std::numbers::pi / 2;
  return adaptive_simpson(integrand, -half_pi, half_pi, 1e-10);
}

}  // namespace gshift
