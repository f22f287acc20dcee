// gshift-cli: bounds, power envelopes, Monte Carlo verification suites and
// support-function queries for shifted Gaussian measures of symmetric convex sets.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gshift/commands.hpp"
#include "gshift/verification.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Gaussian shift bounds for symmetric convex sets"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: $GSHIFT_THREADS or hardware count)");

  struct Args {
    std::string config;
    std::string out;
    std::string csv;
  };
  Args args;
  const char* help[][2] = {
      {"bounds", "Lower and upper shift ratio bounds over t_grid"},
      {"power", "Power envelope over theta_grid, optionally checked by Monte Carlo"},
      {"verify", "Run a verification suite; exit status 0 iff every verdict passes"},
      {"support", "Support function values along the given directions"},
  };
  for (const auto& [name, text] : help) {
    auto* sub = app.add_subcommand(name, text);
    sub->add_option("--config", args.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", args.out, "Report path")->required();
    sub->add_option("--csv", args.csv, "Optional CSV table path");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gshift::cli::kExitConfigError;
  }

  if (threads > 0) gshift::set_default_threads(threads);
  const auto command = gshift::cli::parse_command(app.get_subcommands().front()->get_name());
  std::optional<std::filesystem::path> csv;
  if (!args.csv.empty()) csv = args.csv;
  return gshift::cli::run_cli(*command, args.config, args.out, csv, std::cerr);
}
