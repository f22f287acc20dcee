#pragma once

// Run configuration for the command-line front end. A configuration is one
// JSON document; every validation failure names the offending field path
// (e.g. "$.body.parts[1].radius").

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gshift/verification.hpp"

namespace gshift::cli {

enum class Command { bounds, power, verify, support };

std::string_view to_string(Command c) noexcept;
std::optional<Command> parse_command(std::string_view name) noexcept;

inline constexpr std::string_view kSuites[] = {"sandwich", "derivative", "conditional",
                                               "power",    "oracles",    "kernels"};

struct McSettings {
  std::size_t samples = 1000000;
  std::uint64_t seed = 1;
  double z_threshold = 4.0;
};

struct RunConfig {
  Command command = Command::bounds;
  nlohmann::json source;  ///< the document as read, echoed into reports
  Eigen::Index dim = 0;
  std::optional<Cov> sigma;
  std::optional<Dir> u;
  std::optional<Body> body;
  std::optional<Layered> layers;
  std::vector<double> t_grid;
  std::vector<double> theta_grid;
  std::optional<double> alpha;
  std::optional<McSettings> mc;
  std::vector<Eigen::VectorXd> directions;
  std::string suite;
  double step = 1e-2;
  double upper_scale = 1.0;
  std::vector<std::string> warnings;

  const Cov& covariance() const { return *sigma; }
  const Dir& direction() const { return *u; }
  bool identity_sigma() const { return sigma->matrix().isIdentity(0.0); }
};

/// Parses one body node of the grammar
///   slab{normal, halfwidth} | lp_ball{p, radius} | ellipsoid{matrix}
///   | h_polytope{constraints: [{a, b}]} | intersection{parts} | linear_image{base, matrix}.
Body parse_body(const nlohmann::json& node, const std::string& path, Eigen::Index dim,
                std::vector<std::string>& warnings);

/// Validates `doc` for `command` against every downstream precondition.
RunConfig parse_config(const nlohmann::json& doc, Command command);

RunConfig load_config(const std::filesystem::path& path, Command command);

}  // namespace gshift::cli
