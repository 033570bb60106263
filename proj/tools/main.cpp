#include <iostream>

#include "CLI11.hpp"
#include "cli.hpp"

using namespace lorentz;
using namespace lorentz::cli;

namespace {

void common_options(CLI::App* sub, RunConfig& cfg, bool needs_spec = true) {
  if (needs_spec) sub->add_option("--spec", cfg.spec_path, "metric spec file, or builtin:NAME[:key=value,...]")->required();
  sub->add_option("--point", cfg.point, "base point p, chart coordinates (comma separated)")->delimiter(',');
  sub->add_option("--T", cfg.T, "observer vector at p (default: foliation normal)")->delimiter(',');
  sub->add_option("--rmax", cfg.rmax, "search radius in gT length (command default when omitted)")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--grid", cfg.grid, "loop-search lattice points per radius and axis")
      ->check(CLI::Range(2, 64))
      ->capture_default_str();
  sub->add_option("--tol", cfg.tol, "integrator tolerance")->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--out", cfg.out, "output directory")->capture_default_str();
  sub->add_option("--seed", cfg.seed, "seed for Monte Carlo sampling")->capture_default_str();
  sub->add_option("--format", cfg.format, "table format")
      ->check(CLI::IsMember({"csv", "plotdata"}))
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lorentz: observer-based injectivity radius, null cone and cone volume analyses"};
  app.footer(
      "Environment:\n  LORENTZ_THREADS  worker threads for batch work (default: hardware concurrency)\n"
      "Exit codes: 0 success, 1 analysis failure, 2 configuration or parse error.\n"
      "Outputs: <out>/summary.csv, <out>/report.txt, <out>/manifest.txt and command tables.");
  app.require_subcommand(1);
  RunConfig cfg;

  auto* describe = app.add_subcommand("describe", "metric, Christoffel and curvature tables at probe points");
  common_options(describe, cfg);

  auto* geodesic = app.add_subcommand("geodesic", "geodesic with transported frame and drift columns");
  common_options(geodesic, cfg);
  geodesic->add_option("--direction", cfg.direction, "initial velocity, observer-frame components")->delimiter(',');
  geodesic->add_option("--smax", cfg.smax, "affine parameter range")->capture_default_str();

  auto* radius = app.add_subcommand("radius", "conjugate radius, loops, injectivity estimate and theorem bounds");
  common_options(radius, cfg);
  radius->add_option("--dirs", cfg.dirs, "conjugate-search directions")->capture_default_str();
  radius->add_option("--eps", cfg.eps, "epsilon of the foliated chain")->capture_default_str();
  radius->add_option("--r0", cfg.r0, "curvature scale r0 (0: automatic)")->capture_default_str();

  auto* nullcone = app.add_subcommand("nullcone", "null-cone localization, graph and null injectivity radius");
  common_options(nullcone, cfg);
  nullcone->add_option("--dirs", cfg.dirs, "null rays / conjugate directions")->capture_default_str();
  nullcone->add_option("--trange", cfg.t_range, "coordinate time depth of the localization")->capture_default_str();
  nullcone->add_option("--graph-radius", cfg.graph_radius, "coordinate radius of the graph grid")->capture_default_str();
  nullcone->add_option("--graph-dirs", cfg.graph_dirs, "spatial directions of the graph grid")->capture_default_str();
  nullcone->add_option("--levels", cfg.graph_levels, "slices and radial levels")->capture_default_str();

  auto* volume = app.add_subcommand("volume", "cone volumes and the comparison ratio curve");
  common_options(volume, cfg);
  volume->add_option("--radii", cfg.radii, "explicit increasing radii")->delimiter(',');
  volume->add_option("--count", cfg.count, "radii up to --rmax when --radii is absent")->capture_default_str();
  volume->add_option("--K2", cfg.K2, "model curvature (default: matched to Ric at p)");
  volume->add_option("--half-angle", cfg.half_angle, "cap half-angle in (0, pi/4]")->capture_default_str();
  volume->add_option("--orientation", cfg.orientation, "future or past")->capture_default_str();
  volume->add_option("--azimuth", cfg.n_azimuth, "azimuthal lattice size")->capture_default_str();
  volume->add_option("--panels", cfg.panels, "polar Gauss panels")->capture_default_str();
  volume->add_option("--mc", cfg.mc, "extra Monte Carlo column with this many random directions");

  auto* verify = app.add_subcommand("verify", "run the invariant suite over the builtin models");
  common_options(verify, cfg, false);
  verify->add_option("--inject-fault", cfg.inject_fault, "deliberate bug for testing the suite (curvature-sign)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }
  cfg.command = app.get_subcommands().front()->get_name();

  try {
    if (cfg.command == "describe") return cmd_describe(cfg);
    if (cfg.command == "geodesic") return cmd_geodesic(cfg);
    if (cfg.command == "radius") return cmd_radius(cfg);
    if (cfg.command == "nullcone") return cmd_nullcone(cfg);
    if (cfg.command == "volume") return cmd_volume(cfg);
    return cmd_verify(cfg);
  } catch (const SpecError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "analysis failed: " << e.what() << "\n";
    return kAnalysisFailure;
  }
}
