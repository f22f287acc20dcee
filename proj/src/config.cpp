#include "gshift/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace gshift::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path, what); }

std::string field(const std::string& path, std::string_view key) { return path + "." + std::string(key); }

std::string item(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void allow_keys(const json& node, const std::string& path, std::initializer_list<std::string_view> keys) {
  for (const auto& [key, value] : node.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) fail(field(path, key), "unknown field");
  }
}

const json& require(const json& node, const std::string& path, std::string_view key) {
  if (!node.is_object()) fail(path, "expected an object");
  const auto it = node.find(std::string(key));
  if (it == node.end()) fail(field(path, key), "missing required field");
  return *it;
}

double number(const json& node, const std::string& path) {
  if (!node.is_number()) fail(path, "expected a number");
  const double x = node.get<double>();
  if (!std::isfinite(x)) fail(path, "expected a finite number");
  return x;
}

double positive(const json& node, const std::string& path) {
  const double x = number(node, path);
  if (!(x > 0)) fail(path, "must be positive");
  return x;
}

Eigen::VectorXd vector(const json& node, const std::string& path, Eigen::Index dim) {
  if (!node.is_array()) fail(path, "expected an array of numbers");
  if (static_cast<Eigen::Index>(node.size()) != dim) {
    fail(path, "expected " + std::to_string(dim) + " entries, got " + std::to_string(node.size()));
  }
  Eigen::VectorXd v(dim);
  for (std::size_t i = 0; i < node.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(node[i], item(path, i));
  return v;
}

Eigen::MatrixXd matrix(const json& node, const std::string& path, Eigen::Index dim) {
  if (!node.is_array()) fail(path, "expected an array of rows");
  if (static_cast<Eigen::Index>(node.size()) != dim) {
    fail(path, "expected " + std::to_string(dim) + " rows, got " + std::to_string(node.size()));
  }
  Eigen::MatrixXd m(dim, dim);
  for (std::size_t i = 0; i < node.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = vector(node[i], item(path, i), dim);
  return m;
}

std::vector<double> grid(const json& node, const std::string& path, bool strictly_positive) {
  if (!node.is_array() || node.empty()) fail(path, "expected a nonempty array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const double x = number(node[i], item(path, i));
    if (strictly_positive ? !(x > 0) : !(x >= 0)) {
      fail(item(path, i), strictly_positive ? "must be positive" : "must be nonnegative");
    }
    out.push_back(x);
  }
  return out;
}

/// Normalizes v, warning when its norm is off by more than 1e-6.
Dir unit(const Eigen::VectorXd& v, const std::string& path, std::vector<std::string>& warnings) {
  const double norm = v.norm();
  if (!(norm > 0)) fail(path, "must be nonzero");
  if (std::fabs(norm - 1) > 1e-6) {
    std::ostringstream os;
    os.precision(17);
    os << path << ": normalized vector of norm " << norm;
    warnings.push_back(os.str());
  }
  return Dir::normalized(v);
}

/// Runs a library constructor, turning its errors into config errors at `path`.
template <typename F>
auto guarded(const std::string& path, F&& make) {
  try {
    return make();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    fail(path, e.what());
  }
}

Cov parse_sigma(const json& node, const std::string& path, Eigen::Index dim) {
  if (node.is_string()) {
    if (node.get<std::string>() != "identity") fail(path, "expected \"identity\", {diagonal} or {dense}");
    return Cov::identity(dim);
  }
  if (!node.is_object() || node.size() != 1) fail(path, "expected \"identity\", {diagonal} or {dense}");
  if (node.contains("diagonal")) {
    const auto d = vector(node["diagonal"], field(path, "diagonal"), dim);
    return guarded(field(path, "diagonal"), [&] { return Cov::diagonal(d); });
  }
  if (node.contains("dense")) {
    const auto m = matrix(node["dense"], field(path, "dense"), dim);
    return guarded(field(path, "dense"), [&] { return Cov(m); });
  }
  fail(path, "expected \"identity\", {diagonal} or {dense}");
}

McSettings parse_mc(const json& node, const std::string& path) {
  if (!node.is_object()) fail(path, "expected an object");
  allow_keys(node, path, {"samples", "seed", "z_threshold"});
  McSettings mc;
  if (node.contains("samples")) {
    const auto& s = node["samples"];
    if (!s.is_number_integer() || s.get<long long>() < 1) fail(field(path, "samples"), "must be a positive integer");
    mc.samples = s.get<std::size_t>();
  }
  if (node.contains("seed")) {
    const auto& s = node["seed"];
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<long long>() < 0)) {
      fail(field(path, "seed"), "must be a nonnegative integer");
    }
    mc.seed = s.get<std::uint64_t>();
  }
  if (node.contains("z_threshold")) mc.z_threshold = positive(node["z_threshold"], field(path, "z_threshold"));
  return mc;
}

Layered parse_layers(const json& node, const std::string& path, Eigen::Index dim,
                     std::vector<std::string>& warnings) {
  if (!node.is_array() || node.empty()) fail(path, "expected a nonempty array of {weight, body}");
  std::vector<Layered::Layer> layers;
  for (std::size_t i = 0; i < node.size(); ++i) {
    const std::string p = item(path, i);
    if (!node[i].is_object()) fail(p, "expected an object");
    allow_keys(node[i], p, {"weight", "body"});
    const double weight = positive(require(node[i], p, "weight"), field(p, "weight"));
    layers.push_back({weight, parse_body(require(node[i], p, "body"), field(p, "body"), dim, warnings)});
  }
  return guarded(path, [&] { return Layered(std::move(layers)); });
}

bool needs_body(Command command, const std::string& suite) {
  return command != Command::verify || suite != "kernels";
}

}  // namespace

std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::bounds: return "bounds";
    case Command::power: return "power";
    case Command::verify: return "verify";
    case Command::support: return "support";
  }
  return "unknown";
}

std::optional<Command> parse_command(std::string_view name) noexcept {
  for (Command c : {Command::bounds, Command::power, Command::verify, Command::support}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

Body parse_body(const json& node, const std::string& path, Eigen::Index dim, std::vector<std::string>& warnings) {
  if (!node.is_object()) fail(path, "expected a body object");
  const auto& kind_node = require(node, path, "kind");
  if (!kind_node.is_string()) fail(field(path, "kind"), "expected a string");
  const std::string kind = kind_node.get<std::string>();

  if (kind == "slab") {
    allow_keys(node, path, {"kind", "normal", "halfwidth"});
    const auto normal = unit(vector(require(node, path, "normal"), field(path, "normal"), dim), field(path, "normal"), warnings);
    const double a = positive(require(node, path, "halfwidth"), field(path, "halfwidth"));
    return Body::slab(normal, a);
  }
  if (kind == "lp_ball") {
    allow_keys(node, path, {"kind", "p", "radius"});
    const auto& p_node = require(node, path, "p");
    double p = 0;
    if (p_node.is_string() && p_node.get<std::string>() == "inf") {
      p = std::numeric_limits<double>::infinity();
    } else {
      p = number(p_node, field(path, "p"));
      if (!(p >= 1)) fail(field(path, "p"), "must be >= 1 or \"inf\"");
    }
    const double radius = positive(require(node, path, "radius"), field(path, "radius"));
    return Body::lp_ball(dim, p, radius);
  }
  if (kind == "ellipsoid") {
    allow_keys(node, path, {"kind", "matrix"});
    const auto m = matrix(require(node, path, "matrix"), field(path, "matrix"), dim);
    return guarded(field(path, "matrix"), [&] { return Body::ellipsoid(m); });
  }
  if (kind == "h_polytope") {
    allow_keys(node, path, {"kind", "constraints"});
    const std::string cp = field(path, "constraints");
    const auto& rows = require(node, path, "constraints");
    if (!rows.is_array() || rows.empty()) fail(cp, "expected a nonempty array of {a, b}");
    Eigen::MatrixXd a(static_cast<Eigen::Index>(rows.size()), dim);
    Eigen::VectorXd b(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string rp = item(cp, i);
      if (!rows[i].is_object()) fail(rp, "expected an object");
      allow_keys(rows[i], rp, {"a", "b"});
      a.row(static_cast<Eigen::Index>(i)) = vector(require(rows[i], rp, "a"), field(rp, "a"), dim);
      b[static_cast<Eigen::Index>(i)] = positive(require(rows[i], rp, "b"), field(rp, "b"));
    }
    return guarded(cp, [&] { return Body::h_polytope(a, b); });
  }
  if (kind == "intersection") {
    allow_keys(node, path, {"kind", "parts"});
    const std::string pp = field(path, "parts");
    const auto& parts = require(node, path, "parts");
    if (!parts.is_array() || parts.empty()) fail(pp, "expected a nonempty array of bodies");
    std::vector<Body> bodies;
    for (std::size_t i = 0; i < parts.size(); ++i) bodies.push_back(parse_body(parts[i], item(pp, i), dim, warnings));
    return Body::intersection(std::move(bodies));
  }
  if (kind == "linear_image") {
    allow_keys(node, path, {"kind", "base", "matrix"});
    const auto base = parse_body(require(node, path, "base"), field(path, "base"), dim, warnings);
    const auto m = matrix(require(node, path, "matrix"), field(path, "matrix"), dim);
    return guarded(field(path, "matrix"), [&] { return transform(base, m); });
  }
  fail(field(path, "kind"), "unknown body kind \"" + kind + "\"");
}

RunConfig parse_config(const json& doc, Command command) {
  const std::string root = "$";
  if (!doc.is_object()) fail(root, "expected a JSON object");
  allow_keys(doc, root, {"dim", "sigma", "u", "body", "layers", "t_grid", "theta_grid", "alpha", "mc",
                         "directions", "suite", "step", "fault_injection"});

  RunConfig cfg;
  cfg.command = command;
  cfg.source = doc;

  const auto& dim_node = require(doc, root, "dim");
  if (!dim_node.is_number_integer() || dim_node.get<long long>() < 1 || dim_node.get<long long>() > kMaxDim) {
    fail("$.dim", "must be an integer in [1, " + std::to_string(kMaxDim) + "]");
  }
  cfg.dim = dim_node.get<Eigen::Index>();

  cfg.sigma = doc.contains("sigma") ? parse_sigma(doc["sigma"], "$.sigma", cfg.dim) : Cov::identity(cfg.dim);

  if (command == Command::verify) {
    const auto& s = require(doc, root, "suite");
    if (!s.is_string()) fail("$.suite", "expected a string");
    cfg.suite = s.get<std::string>();
    if (std::find(std::begin(kSuites), std::end(kSuites), cfg.suite) == std::end(kSuites)) {
      fail("$.suite", "unknown suite \"" + cfg.suite + "\"");
    }
  } else if (doc.contains("suite")) {
    fail("$.suite", "only valid for the verify command");
  }

  if (doc.contains("u")) cfg.u = unit(vector(doc["u"], "$.u", cfg.dim), "$.u", cfg.warnings);

  if (doc.contains("body") && doc.contains("layers")) fail("$.layers", "give either body or layers, not both");
  if (doc.contains("body")) cfg.body = parse_body(doc["body"], "$.body", cfg.dim, cfg.warnings);
  if (doc.contains("layers")) cfg.layers = parse_layers(doc["layers"], "$.layers", cfg.dim, cfg.warnings);

  if (doc.contains("t_grid")) cfg.t_grid = grid(doc["t_grid"], "$.t_grid", false);
  if (doc.contains("theta_grid")) cfg.theta_grid = grid(doc["theta_grid"], "$.theta_grid", true);
  if (doc.contains("alpha")) {
    const double a = number(doc["alpha"], "$.alpha");
    if (!(a > 0 && a < 1)) fail("$.alpha", "must lie in (0, 1)");
    cfg.alpha = a;
  }
  if (doc.contains("mc")) cfg.mc = parse_mc(doc["mc"], "$.mc");
  if (doc.contains("directions")) {
    const auto& d = doc["directions"];
    if (!d.is_array() || d.empty()) fail("$.directions", "expected a nonempty array of vectors");
    for (std::size_t i = 0; i < d.size(); ++i) cfg.directions.push_back(vector(d[i], item("$.directions", i), cfg.dim));
  }
  if (doc.contains("step")) cfg.step = positive(doc["step"], "$.step");
  if (doc.contains("fault_injection")) {
    const auto& f = doc["fault_injection"];
    if (!f.is_object()) fail("$.fault_injection", "expected an object");
    allow_keys(f, "$.fault_injection", {"upper_scale"});
    if (f.contains("upper_scale")) cfg.upper_scale = positive(f["upper_scale"], "$.fault_injection.upper_scale");
    cfg.warnings.push_back("fault injection active: upper bounds scaled before adjudication");
  }

  // Per-command requirements.
  const bool uses_layers = command == Command::bounds ||
                           (command == Command::verify && (cfg.suite == "sandwich" || cfg.suite == "derivative"));
  if (needs_body(command, cfg.suite)) {
    if (cfg.layers && !uses_layers) fail("$.layers", "this command needs a single body");
    if (!cfg.body && !cfg.layers) fail("$.body", "missing required field");
  }
  if (command == Command::support) {
    if (cfg.directions.empty()) fail("$.directions", "missing required field");
    return cfg;
  }
  if (needs_body(command, cfg.suite) && !cfg.u) fail("$.u", "missing required field");

  const bool power_like = command == Command::power || cfg.suite == "power";
  if (power_like) {
    if (cfg.theta_grid.empty()) fail("$.theta_grid", "missing required field");
    if (command == Command::power && !cfg.alpha && !cfg.mc) fail("$.alpha", "power needs alpha or an mc block");
  } else if (!(command == Command::verify && cfg.suite == "kernels")) {
    if (cfg.t_grid.empty()) fail("$.t_grid", "missing required field");
  }
  if (command == Command::verify && cfg.suite != "kernels" && !cfg.mc) fail("$.mc", "missing required field");

  if (cfg.suite == "oracles") {
    if (!cfg.identity_sigma()) fail("$.sigma", "the oracles suite needs the identity covariance");
    const auto kind = cfg.body->kind();
    bool ok = kind == "slab";
    if (kind == "lp_ball") ok = std::get<Body::LpBall>(cfg.body->variant()).p == 2.0 && cfg.dim >= 2;
    if (!ok) fail("$.body.kind", "the oracles suite supports slabs and Euclidean balls (dim >= 2)");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path, Command command) {
  std::ifstream in(path);
  if (!in) fail("$", "cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("$", std::string("invalid JSON: ") + e.what());
  }
  return parse_config(doc, command);
}

}  // namespace gshift::cli
