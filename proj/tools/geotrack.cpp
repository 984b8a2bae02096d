#include <iostream>

#include <CLI11.hpp>

#include "geotrack/cli.hpp"

int main(int argc, char ** argv)
{
  namespace gc = geotrack::cli;

  CLI::App app{"Batch tracking simulations on spheres and Lie groups"};
  app.require_subcommand(1);

  std::string config;
  auto * run = app.add_subcommand("run", "Lift the reference, simulate the batch and write rollouts.csv/summary.json");
  run->add_option("config", config, "Run configuration (JSON)")->required();

  std::string report_dir;
  bool as_json = false;
  auto * report = app.add_subcommand("report", "Summarize a completed run");
  report->add_option("dir", report_dir, "Run output directory")->required();
  report->add_flag("--json", as_json, "Print a single JSON document");

  std::string export_dir, kind, output;
  auto * exp = app.add_subcommand("export", "Write plot-ready long-format CSV");
  exp->add_option("dir", export_dir, "Run output directory")->required();
  exp->add_option("--kind", kind, "trajectories | lyapunov | error-norm")->required();
  exp->add_option("--output,-o", output, "Output file (default <dir>/<kind>.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : gc::kConfigError;
  }

  try {
    if (*run) {
      return gc::run_command(config, std::cout, std::cerr);
    }
    if (*report) {
      return gc::report_command(report_dir, as_json, std::cout, std::cerr);
    }
    std::optional<std::filesystem::path> out;
    if (!output.empty()) {
      out = output;
    }
    return gc::export_command(export_dir, kind, out, std::cout, std::cerr);
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return gc::kLiftOrDataError;
  }
}
