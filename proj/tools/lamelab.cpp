// lamelab: batch entry point for the region, form, capacity, probe, search
// and fixture commands. Flags may also come from a key=value config file;
// flags given on the command line win.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lamelab/commands.hpp"

namespace {

/// Writes `text` to `path` through a temporary file and a rename.
void write_atomically(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw lamelab::UsageError("cannot write '" + tmp.string() + "'");
    os << text;
    if (!os.flush()) throw lamelab::UsageError("cannot write '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

int main(int argc, char** argv) {
  lamelab::RunConfig cfg;
  CLI::App app{"Weighted positivity, capacity and boundary regularity experiments for the Lame system", "lamelab"};
  app.set_help_flag("--help", "print this help and exit");
  app.set_version_flag("--version", lamelab::version_string);
  app.set_config("--config", "", "key=value file with defaults for any flag");
  app.allow_config_extras(false);

  double tol = 0.0;
  double ball = 0.0;
  app.add_option("--alpha", cfg.alpha, "elastic coupling alpha (> -1); form accepts several");
  auto* tol_opt = app.add_option("--tol", tol, "tolerance (bisection, residual or solver, by command)");
  app.add_option("--seeds", cfg.seeds, "number of seeded test fields");
  app.add_option("--seed", cfg.seed, "base seed");
  app.add_option("--h", cfg.h, "voxel spacing, e.g. 1/64");
  app.add_option("--levels", cfg.levels, "finest dyadic level");
  auto* ball_opt = app.add_option("--ball", ball, "radius of a closed ball about the origin");
  app.add_option("--voxfile", cfg.voxfile, "voxdom v1 input file");
  app.add_option("--fixture", cfg.fixture, "built-in domain: cone, half-space or point");
  app.add_option("--n", cfg.n, "voxels per edge of the fixture grid");
  app.add_option("--radius", cfg.radius, "probe radius R");
  app.add_flag("--coercivity", cfg.coercivity, "also check the coercivity lower bound");
  app.add_option("--resolution", cfg.resolution, "quadrature level: 1 default, 2 doubled");
  app.add_option("--budget", cfg.budget, "search evaluations");
  app.add_option("--boundary", cfg.boundary, "capacity outer boundary: monopole or dirichlet");
  app.add_option("--format", cfg.format, "json or csv");
  app.add_option("--out", cfg.out, "output path (default stdout)");

  for (const char* name : {"region", "form", "capacity", "probe", "search", "fixture"})
    app.add_subcommand(name)->fallthrough();
  app.get_subcommand("region")->description("positivity interval and critical values of alpha");
  app.get_subcommand("form")->description("identity residuals (and coercivity ratios) on seeded fields");
  app.get_subcommand("capacity")->description("harmonic capacity of a voxel set or a ball");
  app.get_subcommand("probe")->description("Lame Dirichlet solve and decay profile near the origin");
  app.get_subcommand("search")->description("seeded search for a field with negative weighted form");
  app.get_subcommand("fixture")->description("write a built-in domain as a voxdom v1 file");
  app.require_subcommand(1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lamelab::exit_usage;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (tol_opt->count() > 0) cfg.tol = tol;
  if (ball_opt->count() > 0) cfg.ball = ball;

  const lamelab::CommandResult res = lamelab::run_command(cfg);
  if (!res.error.empty()) std::cerr << "lamelab: " << res.error << '\n';
  try {
    if (cfg.out.empty()) {
      std::cout << res.output;
    } else if (!res.output.empty()) {
      write_atomically(cfg.out, res.output);
      if (!res.sidecar.empty()) {
        std::filesystem::path side = cfg.out;
        side.replace_extension(".csv");
        if (side != std::filesystem::path(cfg.out)) write_atomically(side, res.sidecar);
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "lamelab: " << e.what() << '\n';
    return lamelab::exit_usage;
  }
  return res.exit_code;
}
