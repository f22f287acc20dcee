#include "gshift/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>

#include "gshift/scalar_kernels.hpp"

#ifndef GSHIFT_VERSION
#define GSHIFT_VERSION "0.0.0+unknown"
#endif

namespace gshift::cli {

using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t query_seed(const McSettings& mc, std::size_t k) { return mc.seed + k; }

std::string yes_no(bool pass) { return pass ? "true" : "false"; }

double z_score(double diff, double sigma) {
  if (sigma > 0) return diff / sigma;
  if (diff == 0) return 0;
  return diff > 0 ? kInf : -kInf;
}

json error_record(double t, const std::exception& e) {
  return {{"t", t}, {"error", e.what()}, {"pass", false}};
}

/// Query in whitened coordinates when Sigma is not the identity.
struct Standardized {
  Body body;
  Dir u;
  double scale;  ///< whitened t = scale * t
};

Standardized standardize(const RunConfig& cfg, const Body& body) {
  if (cfg.identity_sigma()) return {body, cfg.direction(), 1.0};
  const auto w = whiten(cfg.covariance(), body, cfg.direction(), 1.0);
  return {w.body, w.u, w.t};
}

Layered standardize_layers(const RunConfig& cfg, const Layered& w) {
  if (cfg.identity_sigma()) return w;
  std::vector<Layered::Layer> layers;
  for (const auto& layer : w.layers()) layers.push_back({layer.weight, transform(layer.body, cfg.covariance().inv_sqrt())});
  return Layered(std::move(layers));
}

CommandResult power_records(const RunConfig& cfg) {
  CommandResult out;
  const auto& cov = cfg.covariance();
  const auto& body = *cfg.body;
  const auto& u = cfg.direction();

  double alpha = 0, alpha_se = 0;
  json alpha_record;
  if (cfg.alpha) {
    alpha = *cfg.alpha;
    alpha_record = {{"value", alpha}, {"std_error", 0.0}, {"provenance", {{"method", "config"}}}};
  } else {
    const auto inside = estimate_shift_prob(cov, body, u, 0.0, cfg.mc->samples, cfg.mc->seed, streams::size);
    alpha = 1 - inside.value;
    alpha_se = inside.std_error;
    if (!(alpha > 0 && alpha < 1)) {
      throw InsufficientSamplesError("power: estimated size " + format_number(alpha) +
                                     " is degenerate; increase mc.samples");
    }
    alpha_record = to_json(inside);
    alpha_record["value"] = alpha;
  }

  out.csv.header = {"theta", "alpha", "beta_lower", "beta_upper", "mc_power", "mc_std_error", "pass"};
  const bool with_mc = cfg.mc.has_value();
  for (std::size_t k = 0; k < cfg.theta_grid.size(); ++k) {
    const double theta = cfg.theta_grid[k];
    const auto env = power_envelope(cov, body, u, theta, alpha);
    json record = {{"envelope", to_json(env)}, {"alpha", alpha_record}};
    std::vector<std::string> row = {format_number(theta), format_number(alpha), format_number(env.beta_lower),
                                    format_number(env.beta_upper)};
    bool pass = true;
    if (with_mc) {
      const auto est = estimate_power(cov, body, u, theta, cfg.mc->samples, query_seed(*cfg.mc, k));
      // The envelope moves by at most one unit per unit of alpha.
      const double sigma = std::hypot(est.std_error, alpha_se);
      const double lower_z = z_score(est.value - env.beta_lower, sigma);
      const double upper_z = z_score(est.value - env.beta_upper, sigma);
      const double z = cfg.mc->z_threshold;
      pass = lower_z >= -z && upper_z <= z;
      record["monte_carlo"] = to_json(est);
      record["verdict"] = {{"sigma", sigma}, {"lower_z", number(lower_z)}, {"upper_z", number(upper_z)},
                           {"z_threshold", z}, {"pass", pass}};
      row.push_back(format_number(est.value));
      row.push_back(format_number(est.std_error));
    } else {
      row.push_back("");
      row.push_back("");
    }
    record["pass"] = pass;
    row.push_back(yes_no(pass));
    out.pass = out.pass && pass;
    out.results.push_back(record);
    out.csv.rows.push_back(row);
  }
  return out;
}

CommandResult sandwich_suite(const RunConfig& cfg) {
  CommandResult out;
  out.csv.header = {"t", "lower", "upper", "ratio", "ratio_std_error", "lower_z", "upper_z", "pass"};
  const SandwichOptions options{cfg.mc->z_threshold, cfg.upper_scale};
  for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
    const double t = cfg.t_grid[k];
    const std::uint64_t seed = query_seed(*cfg.mc, k);
    try {
      const auto v = cfg.layers ? verify_sandwich(cfg.covariance(), *cfg.layers, cfg.direction(), t, cfg.mc->samples, seed, options)
                                : verify_sandwich(cfg.covariance(), *cfg.body, cfg.direction(), t, cfg.mc->samples, seed, options);
      json record = to_json(v);
      record["t"] = t;
      out.results.push_back(record);
      out.csv.rows.push_back({format_number(t), format_number(v.bounds.lower), format_number(v.bounds.upper),
                              format_number(v.ratio), format_number(v.ratio_std_error), format_number(v.lower_z),
                              format_number(v.upper_z), yes_no(v.pass)});
      out.pass = out.pass && v.pass;
    } catch (const InsufficientSamplesError& e) {
      out.results.push_back(error_record(t, e));
      out.csv.rows.push_back({format_number(t), "", "", "", "", "", "", "false"});
      out.pass = false;
    }
  }
  return out;
}

CommandResult derivative_suite(const RunConfig& cfg) {
  CommandResult out;
  out.csv.header = {"t", "finite_difference", "direct", "difference", "tolerance", "floor", "pass"};
  const Layered base = cfg.layers ? *cfg.layers : Layered({{1.0, *cfg.body}});
  const Layered w = standardize_layers(cfg, base);
  const double scale = cfg.identity_sigma() ? 1.0 : mahalanobis_norm(cfg.covariance(), cfg.direction());
  const Dir u = cfg.identity_sigma() ? cfg.direction()
                                     : Dir::normalized(cfg.covariance().inv_sqrt() * cfg.direction().vector());
  if (!cfg.identity_sigma()) out.warnings.push_back("derivative suite ran in whitened coordinates");
  const DerivativeOptions options{cfg.mc->z_threshold, 1e-3};
  for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
    const double t = cfg.t_grid[k] * scale;
    const auto r = verify_derivative_identity(w, u, t, cfg.mc->samples, cfg.step, query_seed(*cfg.mc, k), options);
    json record = to_json(r);
    record["t_config"] = cfg.t_grid[k];
    out.results.push_back(record);
    out.csv.rows.push_back({format_number(t), format_number(r.finite_difference.value), format_number(r.direct.value),
                            format_number(r.difference), format_number(r.tolerance), format_number(r.floor),
                            yes_no(r.pass)});
    out.pass = out.pass && r.pass;
  }
  return out;
}

/// Truncated-normal closed form for a slab under the identity covariance.
std::optional<double> slab_center(const RunConfig& cfg, const Body& body, const Dir& u, double t) {
  if (!cfg.identity_sigma() || body.kind() != "slab") return std::nullopt;
  const auto& slab = std::get<Body::Slab>(body.variant());
  const double c = slab.normal.vector().dot(u.vector());
  const auto g = slab_g(slab.halfwidth, t * c);
  return c * (-g.derivative / g.value);
}

CommandResult conditional_suite(const RunConfig& cfg) {
  CommandResult out;
  out.csv.header = {"t", "center", "std_error", "hits", "ceiling", "closed_form", "pass"};
  const auto q = standardize(cfg, *cfg.body);
  if (!cfg.identity_sigma()) out.warnings.push_back("conditional suite ran in whitened coordinates");
  const double z = cfg.mc->z_threshold;
  for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
    const double t = cfg.t_grid[k] * q.scale;
    try {
      const auto est = estimate_conditional_center(q.body, q.u, t, cfg.mc->samples, query_seed(*cfg.mc, k));
      const double ceiling = conditional_coordinate_ceiling(t);
      const double ceiling_z = z_score(est.value - ceiling, est.std_error);
      bool pass = ceiling_z <= z;
      json record = {{"t", t}, {"t_config", cfg.t_grid[k]}, {"center", to_json(est)}, {"ceiling", ceiling},
                     {"ceiling_z", number(ceiling_z)}, {"z_threshold", z}};
      std::string closed_cell;
      if (const auto closed = slab_center(cfg, q.body, q.u, t)) {
        const double closed_z = z_score(est.value - *closed, est.std_error);
        record["closed_form"] = {{"value", *closed}, {"z", number(closed_z)}, {"provenance", analytic()}};
        pass = pass && std::fabs(closed_z) <= z;
        closed_cell = format_number(*closed);
      }
      record["pass"] = pass;
      out.results.push_back(record);
      out.csv.rows.push_back({format_number(t), format_number(est.value), format_number(est.std_error),
                              std::to_string(est.hits), format_number(ceiling), closed_cell, yes_no(pass)});
      out.pass = out.pass && pass;
    } catch (const InsufficientSamplesError& e) {
      out.results.push_back(error_record(t, e));
      out.csv.rows.push_back({format_number(t), "", "", "", "", "", "false"});
      out.pass = false;
    }
  }
  return out;
}

CommandResult oracles_suite(const RunConfig& cfg) {
  CommandResult out;
  out.csv.header = {"t", "oracle", "estimate", "std_error", "z", "pass"};
  const auto& body = *cfg.body;
  const auto& u = cfg.direction();
  const double z = cfg.mc->z_threshold;
  for (std::size_t k = 0; k < cfg.t_grid.size(); ++k) {
    const double t = cfg.t_grid[k];
    double exact = 0;
    json provenance;
    if (body.kind() == "slab") {
      const auto& slab = std::get<Body::Slab>(body.variant());
      exact = oracle_slab(slab.halfwidth, std::fabs(t * slab.normal.vector().dot(u.vector())));
      provenance = analytic();
    } else {
      const auto& ball = std::get<Body::LpBall>(body.variant());
      exact = oracle_ball(static_cast<int>(cfg.dim), ball.radius, t);
      provenance = quadrature(1e-10);
    }
    const auto est = estimate_shift_prob(cfg.covariance(), body, u, t, cfg.mc->samples, query_seed(*cfg.mc, k));
    const double score = z_score(est.value - exact, est.std_error);
    const bool pass = std::fabs(score) <= z;
    out.results.push_back({{"t", t},
                           {"oracle", {{"value", exact}, {"provenance", provenance}}},
                           {"estimate", to_json(est)},
                           {"z", number(score)},
                           {"z_threshold", z},
                           {"pass", pass}});
    out.csv.rows.push_back({format_number(t), format_number(exact), format_number(est.value),
                            format_number(est.std_error), format_number(score), yes_no(pass)});
    out.pass = out.pass && pass;
  }
  return out;
}

CommandResult kernels_suite(const RunConfig& cfg) {
  CommandResult out;
  out.csv.header = {"check", "parameter", "worst", "pass"};
  auto add = [&](const std::string& check, double parameter, double worst, bool pass, json extra) {
    extra["check"] = check;
    extra["parameter"] = parameter;
    extra["worst"] = number(worst);
    extra["pass"] = pass;
    extra["provenance"] = analytic();
    out.results.push_back(extra);
    out.csv.rows.push_back({check, format_number(parameter), format_number(worst), yes_no(pass)});
    out.pass = out.pass && pass;
  };

  std::vector<double> halfwidths{0.0};
  const double lo = std::log(1e-9), hi = std::log(50.0);
  for (int i = 0; i < 198; ++i) halfwidths.push_back(std::exp(lo + (hi - lo) * i / 197.0));
  halfwidths.push_back(kInf);

  const std::vector<double> ts = cfg.t_grid.empty() ? std::vector<double>{0.5, 1, 2, 5, 10} : cfg.t_grid;
  for (double t : ts) {
    const double floor = std::exp(-0.5 * t * t);
    double min_step = kInf, min_floor_gap = kInf, max_r = -kInf, prev = -kInf;
    for (double a : halfwidths) {
      const double r = ratio_r(t, ExtendedHalfWidth<double>(a));
      if (prev > -kInf) min_step = std::min(min_step, r - prev);
      min_floor_gap = std::min(min_floor_gap, r - floor);
      max_r = std::max(max_r, r);
      prev = r;
    }
    const bool pass = min_step >= -1e-12 && min_floor_gap >= -1e-12 && max_r <= 1.0;
    add("ratio_monotone", t, std::min(min_step, min_floor_gap), pass,
        {{"min_step", number(min_step)}, {"min_floor_gap", number(min_floor_gap)}, {"max_r", max_r},
         {"grid_points", halfwidths.size()}});
  }

  for (double a : {0.25, 1.0, 4.0}) {
    double min_lambda = kInf, max_rise = -kInf, prev = kInf;
    for (int i = 1; i <= 400; ++i) {
      const double lam = slab_lambda(a, 10.0 * i / 400.0);
      min_lambda = std::min(min_lambda, lam);
      if (i > 1) max_rise = std::max(max_rise, lam - prev);
      prev = lam;
    }
    const bool pass = min_lambda >= -1e-12 && max_rise <= 1e-12;
    add("lambda_nonnegative_nonincreasing", a, min_lambda, pass,
        {{"min_lambda", min_lambda}, {"max_rise", max_rise}, {"grid_points", 400}});
  }
  return out;
}

}  // namespace

CommandResult run_bounds(const RunConfig& cfg) {
  CommandResult out;
  out.csv.header = {"t", "lower", "upper", "exponent_a", "exactness"};
  for (double t : cfg.t_grid) {
    const auto r = cfg.layers ? ratio_bounds_layered(cfg.covariance(), *cfg.layers, cfg.direction(), t)
                              : ratio_bounds_set(cfg.covariance(), *cfg.body, cfg.direction(), t);
    out.results.push_back(to_json(r));
    const double a = r.exponent_a.is_infinite() ? kInf : r.exponent_a.value();
    out.csv.rows.push_back({format_number(t), format_number(r.lower), format_number(r.upper), format_number(a),
                            std::string(to_string(r.exponent_exactness))});
  }
  return out;
}

CommandResult run_power(const RunConfig& cfg) { return power_records(cfg); }

CommandResult run_verify(const RunConfig& cfg) {
  if (cfg.suite == "sandwich") return sandwich_suite(cfg);
  if (cfg.suite == "derivative") return derivative_suite(cfg);
  if (cfg.suite == "conditional") return conditional_suite(cfg);
  if (cfg.suite == "power") return power_records(cfg);
  if (cfg.suite == "oracles") return oracles_suite(cfg);
  if (cfg.suite == "kernels") return kernels_suite(cfg);
  throw ConfigError("$.suite", "unknown suite \"" + cfg.suite + "\"");
}

CommandResult run_support(const RunConfig& cfg) {
  CommandResult out;
  out.csv.header = {"index", "value", "exactness"};
  for (std::size_t i = 0; i < cfg.directions.size(); ++i) {
    const auto& v = cfg.directions[i];
    const auto s = support(*cfg.body, v);
    json direction = json::array();
    for (Eigen::Index j = 0; j < v.size(); ++j) direction.push_back(v[j]);
    out.results.push_back({{"direction", direction},
                           {"value", number(s.value)},
                           {"exactness", std::string(to_string(s.exactness))},
                           {"provenance", analytic()}});
    out.csv.rows.push_back({std::to_string(i), format_number(s.value), std::string(to_string(s.exactness))});
  }
  return out;
}

CommandResult run_command(const RunConfig& cfg) {
  switch (cfg.command) {
    case Command::bounds: return run_bounds(cfg);
    case Command::power: return run_power(cfg);
    case Command::verify: return run_verify(cfg);
    case Command::support: return run_support(cfg);
  }
  throw Error("unknown command");
}

json make_envelope(const RunConfig& cfg, const CommandResult& result, double seconds) {
  json warnings = json::array();
  for (const auto& w : cfg.warnings) warnings.push_back(w);
  for (const auto& w : result.warnings) warnings.push_back(w);
  json doc = {{"artifact", {{"name", "gaussshift"}, {"version", GSHIFT_VERSION}}},
              {"command", std::string(to_string(cfg.command))},
              {"config", cfg.source},
              {"results", result.results},
              {"status", result.pass ? "pass" : "fail"},
              {"threads", default_threads()},
              {"timings", {{"wall_seconds", seconds}}},
              {"warnings", warnings}};
  if (cfg.command == Command::verify) doc["suite"] = cfg.suite;
  return doc;
}

int run_cli(Command command, const std::filesystem::path& config, const std::filesystem::path& out,
            const std::optional<std::filesystem::path>& csv, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_config(config, command);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  }
  for (const auto& w : cfg.warnings) err << "warning: " << w << "\n";

  try {
    const auto start = std::chrono::steady_clock::now();
    const auto result = run_command(cfg);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file(out, write_report(make_envelope(cfg, result, seconds)));
    if (csv) write_file(*csv, write_csv(result.csv));
    for (const auto& w : result.warnings) err << "warning: " << w << "\n";
    if (!result.pass) {
      for (std::size_t i = 0; i < result.results.size(); ++i) {
        const auto& r = result.results[i];
        if (r.value("pass", true)) continue;
        err << "FAIL record " << i;
        for (const char* key : {"t", "lower_z", "upper_z", "z", "ceiling_z", "error"}) {
          if (r.contains(key)) err << " " << key << "=" << (r[key].is_string() ? r[key].get<std::string>() : r[key].dump());
        }
        if (r.contains("verdict")) err << " verdict=" << r["verdict"].dump();
        err << "\n";
      }
      return kExitVerdictFailed;
    }
    return kExitPass;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

}  // namespace gshift::cli
