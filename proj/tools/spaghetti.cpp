// spaghetti: fit leave-one-out spaghetti functions to a CSV time series and
// write prediction bands, the functions, and the comparators.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "spaghetti/io.hpp"

int main(int argc, char** argv) {
  using namespace spaghetti;

  CLI::App app{"Spaghetti prediction for short time series"};
  app.set_version_flag("--version", std::string(kVersion));

  RunConfig cfg;
  std::string format = "json";
  std::string emit = "all";
  std::optional<double> grid_start;
  std::optional<double> grid_end;

  app.add_option("--input", cfg.input_path, "CSV file of x,y rows")->required();
  app.add_option("--output", cfg.output_path, "Output file (default stdout)");
  app.add_option("--format", format, "json or csv (csv holds the band only)")->capture_default_str();
  app.add_option("--grid-start", grid_start, "First grid x (default x_1 - span/2)");
  app.add_option("--grid-end", grid_end, "Last grid x (default x_n + span/2)");
  app.add_option("--grid-count", cfg.grid.count, "Number of grid points")->capture_default_str();
  app.add_option("--lambda-lo", cfg.fit.lambda_grid.lo, "Smallest lambda candidate")->capture_default_str();
  app.add_option("--lambda-hi", cfg.fit.lambda_grid.hi, "Largest lambda candidate")->capture_default_str();
  app.add_option("--lambda-ppd", cfg.fit.lambda_grid.points_per_decade, "Lambda grid points per decade")
      ->capture_default_str();
  app.add_option("--sigma-lo-factor", cfg.fit.sigma_range.lo_factor, "Smallest sigma as a multiple of the min gap")
      ->capture_default_str();
  app.add_option("--sigma-hi-factor", cfg.fit.sigma_range.hi_factor, "Largest sigma as a multiple of the span")
      ->capture_default_str();
  app.add_option("--sigma-grid", cfg.fit.grid_points, "Sigma grid points")->capture_default_str();
  app.add_option("--refine", cfg.fit.refine_iterations, "Refinement iterations per bracket")
      ->capture_default_str();
  app.add_option("--emit", emit, "functions,band,comparators,all")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInputError;
  }

  try {
    cfg.format = parse_format(format);
    cfg.emit = EmitFlags::parse(emit);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  cfg.grid.start = grid_start;
  cfg.grid.end = grid_end;

  return run(cfg, std::cout, std::cerr);
}
