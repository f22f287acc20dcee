#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include "doctest.h"
#include "gshift/commands.hpp"
#include "gshift/config.hpp"
#include "gshift/report.hpp"
#include "reference_values.hpp"

namespace ref = gshift::reference;
namespace fs = std::filesystem;
using gshift::cli::Command;
using nlohmann::json;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

json slab_config() {
  return json::parse(R"({
    "dim": 2,
    "sigma": "identity",
    "u": [1, 0],
    "body": {"kind": "slab", "normal": [1, 0], "halfwidth": 1},
    "t_grid": [0, 1, 2]
  })");
}

std::string config_error_path(const json& doc, Command command) {
  try {
    gshift::cli::parse_config(doc, command);
  } catch (const gshift::ConfigError& e) {
    return e.path();
  }
  return "<no error>";
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("gshift_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing and defaults") {
  auto doc = slab_config();
  doc["u"] = json::array({3, 0});
  const auto cfg = gshift::cli::parse_config(doc, Command::bounds);
  CHECK(cfg.dim == 2);
  CHECK(cfg.identity_sigma());
  CHECK(cfg.direction().vector()[0] == 1.0);
  REQUIRE(cfg.warnings.size() == 1);
  CHECK(cfg.warnings[0].find("$.u") != std::string::npos);
  CHECK(cfg.t_grid.size() == 3);
  CHECK(cfg.body->kind() == "slab");

  doc = slab_config();
  doc["sigma"] = json::parse(R"({"diagonal": [4, 9]})");
  CHECK(gshift::cli::parse_config(doc, Command::bounds).covariance().matrix()(1, 1) == 9);
  doc["sigma"] = json::parse(R"({"dense": [[2, 0.5], [0.5, 1]]})");
  CHECK(gshift::cli::parse_config(doc, Command::bounds).covariance().matrix()(0, 1) == 0.5);
}

TEST_CASE("config errors carry field paths") {
  auto doc = slab_config();
  doc["body"]["halfwidth"] = -1;
  CHECK(config_error_path(doc, Command::bounds) == "$.body.halfwidth");

  doc = slab_config();
  doc["body"] = json::parse(R"({"kind": "intersection", "parts": [
      {"kind": "lp_ball", "p": 2, "radius": 1}, {"kind": "lp_ball", "p": "two", "radius": 1}]})");
  CHECK(config_error_path(doc, Command::bounds) == "$.body.parts[1].p");

  doc = slab_config();
  doc["body"] = json::parse(R"({"kind": "h_polytope", "constraints": [{"a": [1, 0], "b": 1}, {"a": [0, 1], "b": -2}]})");
  CHECK(config_error_path(doc, Command::bounds) == "$.body.constraints[1].b");

  doc = slab_config();
  doc["sigma"] = json::parse(R"({"dense": [[1, 2], [2, 1]]})");
  CHECK(config_error_path(doc, Command::bounds) == "$.sigma.dense");

  doc = slab_config();
  doc["u"] = json::array({1, 0, 0});
  CHECK(config_error_path(doc, Command::bounds) == "$.u");

  doc = slab_config();
  doc["t_grid"] = json::array({0, -1});
  CHECK(config_error_path(doc, Command::bounds) == "$.t_grid[1]");

  doc = slab_config();
  doc["colour"] = "blue";
  CHECK(config_error_path(doc, Command::bounds) == "$.colour");

  doc = slab_config();
  doc.erase("t_grid");
  CHECK(config_error_path(doc, Command::bounds) == "$.t_grid");

  doc = slab_config();
  doc["theta_grid"] = json::array({1});
  CHECK(config_error_path(doc, Command::power) == "$.alpha");

  doc = slab_config();
  doc["suite"] = "everything";
  CHECK(config_error_path(doc, Command::verify) == "$.suite");

  doc = slab_config();
  doc["layers"] = json::parse(R"([{"weight": 1, "body": {"kind": "lp_ball", "p": 2, "radius": 1}},
                                 {"weight": 1, "body": {"kind": "lp_ball", "p": 2, "radius": 2}}])");
  doc.erase("body");
  CHECK(config_error_path(doc, Command::bounds) == "$.layers");

  doc = slab_config();
  doc["body"] = json::parse(R"({"kind": "ellipsoid", "matrix": [[1, 0], [0, 1]]})");
  doc["suite"] = "oracles";
  doc["mc"] = json::parse(R"({"samples": 1000})");
  CHECK(config_error_path(doc, Command::verify) == "$.body.kind");
}

TEST_CASE("report writer: sorted keys, 17 digits, inf spelling, round trip") {
  const json doc = {{"zeta", 0.1}, {"alpha", kInf}, {"mid", {{"b", 1.0 / 3.0}, {"a", -kInf}}},
                    {"list", {1.0, 2.5e-300, 7}}, {"seed", std::uint64_t{18446744073709551615ull}}};
  const std::string text = gshift::cli::write_report(doc);
  CHECK(text.find("\"alpha\": \"inf\"") != std::string::npos);
  CHECK(text.find("0.33333333333333331") != std::string::npos);
  CHECK(text.find("0.10000000000000001") != std::string::npos);
  CHECK(text.find("\"alpha\"") < text.find("\"list\""));
  CHECK(text.find("\"list\"") < text.find("\"mid\""));
  CHECK(text.find("\"mid\"") < text.find("\"zeta\""));
  CHECK(text.find("1.0,") != std::string::npos);

  const json back = gshift::cli::read_report(text);
  CHECK(gshift::cli::read_number(back["zeta"]) == 0.1);
  CHECK(gshift::cli::read_number(back["alpha"]) == kInf);
  CHECK(gshift::cli::read_number(back["mid"]["a"]) == -kInf);
  CHECK(gshift::cli::read_number(back["mid"]["b"]) == 1.0 / 3.0);
  CHECK(gshift::cli::read_number(back["list"][1]) == 2.5e-300);
  CHECK(back["seed"].get<std::uint64_t>() == 18446744073709551615ull);
  // Writing the re-read document gives the same text.
  CHECK(gshift::cli::write_report(back) == text);
  CHECK_THROWS(gshift::cli::read_number(json("seven")));
}

TEST_CASE("csv writer quotes when needed") {
  gshift::cli::CsvTable t{{"a", "b"}, {{"1", "x,y"}, {"inf", "say \"hi\""}}};
  CHECK(gshift::cli::write_csv(t) == "a,b\n1,\"x,y\"\ninf,\"say \"\"hi\"\"\"\n");
}

TEST_CASE("bounds command") {
  const auto cfg = gshift::cli::parse_config(slab_config(), Command::bounds);
  const auto r = gshift::cli::run_bounds(cfg);
  REQUIRE(r.results.size() == 3);
  CHECK(r.results[0]["lower"].get<double>() == 1.0);
  CHECK(r.results[0]["upper"].get<double>() == 1.0);
  CHECK(std::fabs(r.results[1]["upper"].get<double>() - ref::kRatioT1A1) <= 1e-12);
  CHECK(std::fabs(r.results[2]["upper"].get<double>() - ref::kRatioT2A1) <= 1e-12);
  CHECK(r.results[1]["provenance"]["method"] == "analytic");
  CHECK(r.csv.header == std::vector<std::string>{"t", "lower", "upper", "exponent_a", "exactness"});
  CHECK(r.csv.rows[1][4] == "exact");

  auto doc = slab_config();
  doc["body"] = json::parse(R"({"kind": "intersection", "parts": [
      {"kind": "lp_ball", "p": 2, "radius": 1}, {"kind": "lp_ball", "p": "inf", "radius": 0.8}]})");
  const auto inter = gshift::cli::run_bounds(gshift::cli::parse_config(doc, Command::bounds));
  CHECK(inter.csv.rows[0][4] == "upper_bound");
  CHECK(inter.results[0]["exponent_exactness"] == "upper_bound");

  doc = slab_config();
  doc["u"] = json::array({0, 1});
  const auto orth = gshift::cli::run_bounds(gshift::cli::parse_config(doc, Command::bounds));
  CHECK(orth.results[1]["exponent_a"] == "inf");
  CHECK(orth.csv.rows[1][3] == "inf");

  doc = slab_config();
  doc.erase("body");
  doc["layers"] = json::parse(R"([{"weight": 1, "body": {"kind": "lp_ball", "p": 2, "radius": 2}},
                                 {"weight": 3, "body": {"kind": "lp_ball", "p": 2, "radius": 1}}])");
  const auto layered = gshift::cli::run_bounds(gshift::cli::parse_config(doc, Command::bounds));
  CHECK(layered.results[1]["exponent_a"].get<double>() == doctest::Approx(2));
}

TEST_CASE("power command") {
  auto doc = slab_config();
  doc["body"] = json::parse(R"({"kind": "slab", "normal": [0, 1], "halfwidth": 1})");
  doc["alpha"] = 0.05;
  doc["theta_grid"] = json::array({2, 1, 0.1, 1e-6});
  const auto r = gshift::cli::run_power(gshift::cli::parse_config(doc, Command::power));
  CHECK(std::fabs(r.results[0]["envelope"]["beta_upper"].get<double>() - ref::kPowerUpperAlpha05Theta2) <= 1e-15);
  CHECK(std::fabs(r.results[0]["envelope"]["beta_lower"].get<double>() - 0.05) <= 1e-15);
  double prev = 1;
  for (const auto& rec : r.results) {
    const double up = rec["envelope"]["beta_upper"].get<double>();
    CHECK(up <= prev);
    prev = up;
  }
  CHECK(std::fabs(prev - 0.05) <= 1e-10);

  doc = slab_config();
  doc["theta_grid"] = json::array({1});
  doc["mc"] = json::parse(R"({"samples": 200000, "seed": 3})");
  const auto mc = gshift::cli::run_power(gshift::cli::parse_config(doc, Command::power));
  CHECK(mc.pass);
  CHECK(mc.results[0]["alpha"]["provenance"]["method"] == "monte_carlo");
  CHECK(std::fabs(mc.results[0]["alpha"]["value"].get<double>() - (1 - ref::kCentralOne)) < 0.01);
}

TEST_CASE("support command") {
  auto doc = json::parse(R"({"dim": 2, "body": {"kind": "lp_ball", "p": 1, "radius": 1}, "directions": [[3, -4]]})");
  auto r = gshift::cli::run_support(gshift::cli::parse_config(doc, Command::support));
  CHECK(r.results[0]["value"].get<double>() == doctest::Approx(4));

  doc["body"] = json::parse(R"({"kind": "slab", "normal": [1, 0], "halfwidth": 1})");
  doc["directions"] = json::parse("[[0, 1]]");
  r = gshift::cli::run_support(gshift::cli::parse_config(doc, Command::support));
  CHECK(r.results[0]["value"] == "inf");

  doc["body"] = json::parse(R"({"kind": "ellipsoid", "matrix": [[0.25, 0], [0, 0.1111111111111111]]})");
  doc["directions"] = json::parse("[[1, 0]]");
  r = gshift::cli::run_support(gshift::cli::parse_config(doc, Command::support));
  CHECK(r.results[0]["value"].get<double>() == doctest::Approx(2));

  doc["body"] = json::parse(R"({"kind": "linear_image", "base": {"kind": "lp_ball", "p": "inf", "radius": 1},
                                 "matrix": [[2, 0], [0, 3]]})");
  doc["directions"] = json::parse("[[1, 1]]");
  r = gshift::cli::run_support(gshift::cli::parse_config(doc, Command::support));
  CHECK(r.results[0]["value"].get<double>() == doctest::Approx(5));
}

TEST_CASE("verify suites") {
  auto doc = json::parse(R"({"dim": 2, "suite": "kernels"})");
  auto r = gshift::cli::run_verify(gshift::cli::parse_config(doc, Command::verify));
  CHECK(r.pass);
  CHECK(r.results.size() == 8);

  doc = slab_config();
  doc["suite"] = "sandwich";
  doc["t_grid"] = json::array({0.5, 1.5});
  doc["mc"] = json::parse(R"({"samples": 200000, "seed": 9})");
  r = gshift::cli::run_verify(gshift::cli::parse_config(doc, Command::verify));
  CHECK(r.pass);

  doc["fault_injection"] = json::parse(R"({"upper_scale": 0.5})");
  auto cfg = gshift::cli::parse_config(doc, Command::verify);
  r = gshift::cli::run_verify(cfg);
  CHECK_FALSE(r.pass);
  CHECK(r.results[0]["upper_z"].get<double>() > 4);

  doc = slab_config();
  doc["suite"] = "conditional";
  doc["t_grid"] = json::array({0, 1});
  doc["mc"] = json::parse(R"({"samples": 200000, "seed": 4})");
  r = gshift::cli::run_verify(gshift::cli::parse_config(doc, Command::verify));
  CHECK(r.pass);
  CHECK(r.results[1]["closed_form"]["value"].get<double>() == doctest::Approx(ref::kSlabCenterA1T1));

  doc["suite"] = "oracles";
  r = gshift::cli::run_verify(gshift::cli::parse_config(doc, Command::verify));
  CHECK(r.pass);

  doc["suite"] = "derivative";
  doc["t_grid"] = json::array({1});
  r = gshift::cli::run_verify(gshift::cli::parse_config(doc, Command::verify));
  CHECK(r.pass);

  doc = slab_config();
  doc["sigma"] = json::parse(R"({"diagonal": [4, 9]})");
  doc["body"] = json::parse(R"({"kind": "lp_ball", "p": 2, "radius": 2})");
  doc["suite"] = "conditional";
  doc["t_grid"] = json::array({1});
  doc["mc"] = json::parse(R"({"samples": 100000, "seed": 5})");
  r = gshift::cli::run_verify(gshift::cli::parse_config(doc, Command::verify));
  CHECK(r.pass);
  CHECK(r.warnings.size() == 1);
  CHECK(r.results[0]["t"].get<double>() == doctest::Approx(0.5));
}

TEST_CASE("envelope carries version, config echo and status") {
  const auto cfg = gshift::cli::parse_config(slab_config(), Command::bounds);
  const auto result = gshift::cli::run_bounds(cfg);
  const auto env = gshift::cli::make_envelope(cfg, result, 0.25);
  CHECK(env["artifact"]["name"] == "gaussshift");
  CHECK(env["artifact"]["version"].get<std::string>().rfind("0.1.0", 0) == 0);
  CHECK(env["config"] == slab_config());
  CHECK(env["status"] == "pass");
  CHECK(env["command"] == "bounds");

  // The echoed config reproduces the run.
  const auto again = gshift::cli::parse_config(gshift::cli::read_report(gshift::cli::write_report(env))["config"], Command::bounds);
  CHECK(gshift::cli::run_bounds(again).results == result.results);
}

TEST_CASE("end-to-end through the executable") {
  const char* exe = std::getenv("GSHIFT_CLI");
  if (exe == nullptr) {
    MESSAGE("GSHIFT_CLI not set; skipping");
    return;
  }
  TempDir dir;
  auto run = [&](const std::string& cmd, const json& doc, bool csv) {
    std::ofstream(dir / "config.json") << doc.dump(2);
    std::string line = std::string(exe) + " " + cmd + " --config " + (dir / "config.json").string() + " --out " +
                       (dir / "report.json").string();
    if (csv) line += " --csv " + (dir / "table.csv").string();
    line += " 2> " + (dir / "stderr.txt").string();
    const int status = std::system(line.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };

  CHECK(run("bounds", slab_config(), true) == 0);
  const auto report = gshift::cli::read_report(slurp(dir / "report.json"));
  CHECK(report["status"] == "pass");
  CHECK(std::fabs(report["results"][1]["upper"].get<double>() - ref::kRatioT1A1) <= 1e-12);
  const auto csv = slurp(dir / "table.csv");
  CHECK(csv.rfind("t,lower,upper,exponent_a,exactness\n", 0) == 0);

  auto doc = slab_config();
  doc["suite"] = "sandwich";
  doc["t_grid"] = json::array({1});
  doc["mc"] = json::parse(R"({"samples": 100000, "seed": 2})");
  CHECK(run("verify", doc, false) == 0);
  doc["fault_injection"] = json::parse(R"({"upper_scale": 0.5})");
  CHECK(run("verify", doc, false) == 1);
  CHECK(slurp(dir / "stderr.txt").find("upper_z=") != std::string::npos);
  CHECK(gshift::cli::read_report(slurp(dir / "report.json"))["status"] == "fail");

  doc = slab_config();
  doc["body"]["halfwidth"] = 0;
  CHECK(run("bounds", doc, false) == 2);
  CHECK(slurp(dir / "stderr.txt").find("$.body.halfwidth") != std::string::npos);
}
