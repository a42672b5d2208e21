#pragma once

// Batch commands behind the lamelab tool. Each command maps a resolved
// RunConfig to its output text; nothing here touches argv or the filesystem
// except reading input voxel files.

#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamelab/capacity.hpp"
#include "lamelab/form_oracle.hpp"
#include "lamelab/regularity.hpp"
#include "lamelab/version.hpp"
#include "lamelab/voxel_domain.hpp"
#include "lamelab/wpd_region.hpp"

namespace lamelab {

/// Exit codes of the tool.
enum ExitCode : int { exit_ok = 0, exit_check_failed = 1, exit_usage = 2 };

/// Every tunable of every command. Unset optionals take command defaults.
struct RunConfig {
  std::string command;
  std::vector<double> alpha;
  std::optional<double> tol;
  int seeds = 20;
  std::uint64_t seed = 0;
  std::string h = "1/64";
  int levels = 3;
  std::optional<double> ball;
  std::string voxfile;
  std::string fixture = "cone";
  int n = 128;
  double radius = 0.5;
  bool coercivity = false;
  int resolution = 1;
  std::size_t budget = 5000;
  std::string boundary = "monopole";
  std::string format;  // empty: command default
  std::string out;
};

struct CommandResult {
  int exit_code = exit_ok;
  std::string output;
  std::string sidecar;  // CSV profile accompanying a JSON probe report
  std::string error;
};

namespace cmd {

using json = nlohmann::ordered_json;

inline std::string csv_number(double v) { return detail::format_double(v); }

inline std::string csv_line(const std::vector<std::string>& cells) {
  std::string s;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) s += ',';
    s += cells[i];
  }
  return s + "\r\n";
}

inline json envelope(const std::string& command, json config, json tolerances) {
  json j;
  j["tool"] = "lamelab";
  j["version"] = version_string;
  j["command"] = command;
  j["config"] = std::move(config);
  j["tolerances"] = std::move(tolerances);
  return j;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Accepts "0.015625" or "1/64".
inline double parse_spacing(const std::string& s) {
  double v = 0.0;
  try {
    const auto slash = s.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
      v = std::stod(s, &used);
      if (used != s.size()) throw UsageError("bad spacing '" + s + "'");
    } else {
      const std::string a = s.substr(0, slash), b = s.substr(slash + 1);
      std::size_t ua = 0, ub = 0;
      const double num = std::stod(a, &ua), den = std::stod(b, &ub);
      if (ua != a.size() || ub != b.size() || den == 0.0) throw UsageError("bad spacing '" + s + "'");
      v = num / den;
    }
  } catch (const std::logic_error&) {
    throw UsageError("bad spacing '" + s + "'");
  }
  if (!(v > 0.0) || !std::isfinite(v)) throw UsageError("spacing must be positive");
  return v;
}

inline double positive_tol(const RunConfig& c, double fallback) {
  const double t = c.tol.value_or(fallback);
  if (!(t > 0.0) || !std::isfinite(t)) throw UsageError("--tol must be positive");
  return t;
}

inline std::string format_or(const RunConfig& c, const std::string& fallback) {
  const std::string f = c.format.empty() ? fallback : c.format;
  if (f != "json" && f != "csv") throw UsageError("--format must be json or csv");
  return f;
}

inline VoxelDomain load_voxfile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open voxel file '" + path + "'");
  return read_voxdom(in);
}

inline VoxelDomain fixture_domain(const std::string& name, int n) {
  if (n < 8) throw UsageError("--n must be at least 8");
  const VoxelGrid g = fixture_grid(static_cast<std::size_t>(n));
  if (name == "cone") return rasterize(ConeComplement{}, g);
  if (name == "half-space") return rasterize(HalfSpaceComplement{}, g);
  if (name == "point") return rasterize(PointComplement{}, g);
  throw UsageError("unknown fixture '" + name + "' (cone, half-space, point)");
}

inline json bracket_json(const Bracket& b) { return json{{"lo", b.lo}, {"hi", b.hi}, {"width", b.width()}}; }

inline json field_json(const TestFieldSpec& s) {
  json bumps = json::array();
  for (const auto& b : s.bumps) {
    json q = json::array();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t k = 0; k < 3; ++k) q.push_back(b.mod_quadratic(i, k));
    bumps.push_back(json{{"center", {b.center[0], b.center[1], b.center[2]}},
                         {"radius", b.radius},
                         {"width", b.width},
                         {"amplitude", {b.amplitude[0], b.amplitude[1], b.amplitude[2]}},
                         {"mod_constant", b.mod_constant},
                         {"mod_linear", {b.mod_linear[0], b.mod_linear[1], b.mod_linear[2]}},
                         {"mod_quadratic", q}});
  }
  json j{{"seed", s.seed}, {"support_radius", s.support_radius}, {"bumps", bumps}};
  if (s.cutoff) j["cutoff"] = json{{"inner", s.cutoff->inner}, {"outer", s.cutoff->outer}};
  return j;
}

}  // namespace cmd

// ---------------------------------------------------------------------------

inline CommandResult cmd_region(const RunConfig& c) {
  const double tol = cmd::positive_tol(c, 1e-6);
  const std::string fmt = cmd::format_or(c, "json");
  const RegionReport r = region_report(tol);
  CommandResult out;
  if (fmt == "csv") {
    out.output = cmd::csv_line({"name", "value", "lo", "hi", "width"});
    auto row = [&](const char* name, double v, const Bracket& b) {
      out.output += cmd::csv_line(
          {name, cmd::csv_number(v), cmd::csv_number(b.lo), cmd::csv_number(b.hi), cmd::csv_number(b.width())});
    };
    row("alpha_minus", r.alpha_minus, r.alpha_minus_bracket);
    row("alpha_plus", r.alpha_plus, r.alpha_plus_bracket);
    row("alpha_minus_critical", r.alpha_minus_critical, r.alpha_minus_critical_bracket);
    row("alpha_plus_critical", r.alpha_plus_critical, r.alpha_plus_critical_bracket);
    return out;
  }
  cmd::json j = cmd::envelope("region", {{"tol", tol}}, {{"bisection", tol}, {"scan_step", root_scan_step}});
  j["result"] = {{"alpha_minus", r.alpha_minus},
                 {"alpha_plus", r.alpha_plus},
                 {"alpha_minus_critical", r.alpha_minus_critical},
                 {"alpha_plus_critical", r.alpha_plus_critical},
                 {"brackets",
                  {{"alpha_minus", cmd::bracket_json(r.alpha_minus_bracket)},
                   {"alpha_plus", cmd::bracket_json(r.alpha_plus_bracket)},
                   {"alpha_minus_critical", cmd::bracket_json(r.alpha_minus_critical_bracket)},
                   {"alpha_plus_critical", cmd::bracket_json(r.alpha_plus_critical_bracket)}}},
                 {"bracket_width", r.bracket_width}};
  out.output = cmd::dump(j);
  return out;
}

inline constexpr double coercivity_margin = 0.999;

inline CommandResult cmd_form(const RunConfig& c) {
  const double tol = cmd::positive_tol(c, 1e-6);
  const std::string fmt = cmd::format_or(c, "csv");
  if (c.seeds < 1) throw UsageError("--seeds must be at least 1");
  if (c.resolution < 1 || c.resolution > 3) throw UsageError("--resolution must be 1, 2 or 3");
  const std::vector<double> alphas = c.alpha.empty() ? std::vector<double>{0.0} : c.alpha;
  std::vector<ElasticParameter> params;
  for (double a : alphas) {
    params.emplace_back(a);
    if (c.coercivity && !inside_proven_interval(a))
      throw DomainError("coercivity bound only holds for alpha inside (alpha_-, alpha_+)");
  }
  PolarGrid grid = PolarGrid::default_grid();
  for (int r = 1; r < c.resolution; ++r) grid = grid.refined();
  FieldGenOptions gen;
  gen.origin_excluded = c.coercivity;

  struct Row {
    double alpha;
    std::uint64_t seed;
    FormReport rep;
    double bound;
    bool pass;
  };
  std::vector<Row> rows;
  bool all_pass = true;
  for (int s = 0; s < c.seeds; ++s) {
    const std::uint64_t seed = c.seed + static_cast<std::uint64_t>(s);
    const TestFieldSpec u = generate_test_field(seed, gen);
    const FormMoments fm = form_moments(u, grid);
    for (const auto& p : params) {
      const FormReport rep = report_from_moments(p, fm);
      const double bound = c.coercivity ? coercivity_bound(p) : 0.0;
      bool pass = rep.passes(tol);
      if (c.coercivity) pass = pass && rep.coercivity_ratio >= coercivity_margin * bound;
      all_pass = all_pass && pass;
      rows.push_back({p.alpha(), seed, rep, bound, pass});
    }
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.alpha < b.alpha; });

  CommandResult out;
  out.exit_code = all_pass ? exit_ok : exit_check_failed;
  if (fmt == "csv") {
    std::vector<std::string> head{"alpha", "seed", "lhs", "point_term", "bilinear_star", "residual", "scale", "pass"};
    if (c.coercivity) head.insert(head.end() - 1, {"coercivity_ratio", "coercivity_bound"});
    out.output = cmd::csv_line(head);
    for (const auto& r : rows) {
      std::vector<std::string> cells{cmd::csv_number(r.alpha),          std::to_string(r.seed),
                                     cmd::csv_number(r.rep.lhs),        cmd::csv_number(r.rep.point_term),
                                     cmd::csv_number(r.rep.bilinear_star), cmd::csv_number(r.rep.residual),
                                     cmd::csv_number(r.rep.scale())};
      if (c.coercivity) {
        cells.push_back(cmd::csv_number(r.rep.coercivity_ratio));
        cells.push_back(cmd::csv_number(r.bound));
      }
      cells.push_back(r.pass ? "1" : "0");
      out.output += cmd::csv_line(cells);
    }
    return out;
  }
  cmd::json tolerances{{"residual_relative", tol}};
  if (c.coercivity) tolerances["coercivity_margin"] = coercivity_margin;
  cmd::json j = cmd::envelope("form",
                              {{"alpha", alphas},
                               {"seeds", c.seeds},
                               {"seed", c.seed},
                               {"resolution", c.resolution},
                               {"coercivity", c.coercivity},
                               {"tol", tol}},
                              tolerances);
  cmd::json arr = cmd::json::array();
  for (const auto& r : rows) {
    cmd::json e{{"alpha", r.alpha},
                {"seed", r.seed},
                {"lhs", r.rep.lhs},
                {"point_term", r.rep.point_term},
                {"bilinear_star", r.rep.bilinear_star},
                {"residual", r.rep.residual},
                {"scale", r.rep.scale()}};
    if (c.coercivity) {
      e["coercivity_ratio"] = r.rep.coercivity_ratio;
      e["coercivity_bound"] = r.bound;
    }
    e["pass"] = r.pass;
    arr.push_back(e);
  }
  j["rows"] = arr;
  j["all_pass"] = all_pass;
  out.output = cmd::dump(j);
  return out;
}

inline CommandResult cmd_capacity(const RunConfig& c) {
  const double tol = cmd::positive_tol(c, 1e-8);
  const std::string fmt = cmd::format_or(c, "json");
  CapacityOptions opt;
  opt.tol = tol;
  if (c.boundary == "monopole")
    opt.boundary = OuterBoundary::monopole;
  else if (c.boundary == "dirichlet")
    opt.boundary = OuterBoundary::dirichlet;
  else
    throw UsageError("--boundary must be monopole or dirichlet");

  const bool has_file = !c.voxfile.empty();
  if (has_file == c.ball.has_value()) throw UsageError("give exactly one of --voxfile and --ball");
  VoxelSet k;
  cmd::json config{{"tol", tol}, {"boundary", c.boundary}};
  std::optional<double> analytic;
  if (has_file) {
    const VoxelDomain d = cmd::load_voxfile(c.voxfile);
    k = VoxelSet{d.grid, d.open_mask};
    config["voxfile"] = c.voxfile;
  } else {
    const double rho = *c.ball;
    if (!(rho > 0.0)) throw UsageError("--ball must be positive");
    const double h = cmd::parse_spacing(c.h);
    const double side = 8.0 * rho;  // 4x the diameter
    const double cells = side / h;
    const auto n = static_cast<std::size_t>(std::llround(cells));
    if (n < 8 || std::abs(cells - static_cast<double>(n)) > 1e-9 * cells)
      throw UsageError("--h must divide 8 * ball radius into at least 8 cells");
    k = ball_set(VoxelGrid::cube(Vec3{}, side, n), rho);
    config["ball"] = rho;
    config["h"] = c.h;
    analytic = 4.0 * pi * rho;
  }
  const CapacityEstimate e = capacity(k, opt);
  CommandResult out;
  if (fmt == "csv") {
    out.output = cmd::csv_line({"value", "grid_level", "residual", "iterations"}) +
                 cmd::csv_line({cmd::csv_number(e.value), std::to_string(e.grid_level), cmd::csv_number(e.residual),
                                std::to_string(e.iterations)});
    return out;
  }
  cmd::json j = cmd::envelope("capacity", config, {{"cg_relative_residual", tol}});
  j["result"] = {{"value", e.value}, {"grid_level", e.grid_level}, {"residual", e.residual}, {"iterations", e.iterations}};
  if (analytic) {
    j["result"]["analytic"] = *analytic;
    j["result"]["relative_error"] = (e.value - *analytic) / *analytic;
  }
  out.output = cmd::dump(j);
  return out;
}

inline std::string probe_csv(const ProbeResult& r) {
  std::string s = cmd::csv_line({"level", "rho", "m_rho", "M_rho", "phi_rho", "psi_rho", "wiener_partial", "cap_ball",
                                 "cap_annulus", "gamma", "caccioppoli_first", "caccioppoli_second"});
  for (std::size_t j = 0; j < r.report.radii.size(); ++j) {
    const auto& w = r.wiener.levels[j];
    s += cmd::csv_line({std::to_string(j), cmd::csv_number(r.report.radii[j]), cmd::csv_number(r.report.m_rho[j]),
                        cmd::csv_number(r.report.M_rho[j]), cmd::csv_number(r.report.phi_rho[j]),
                        cmd::csv_number(r.report.psi_rho[j]), cmd::csv_number(r.report.wiener_partials[j]),
                        cmd::csv_number(w.cap_ball), cmd::csv_number(w.cap_annulus), cmd::csv_number(w.gamma),
                        cmd::csv_number(r.caccioppoli[j].first), cmd::csv_number(r.caccioppoli[j].second)});
  }
  return s;
}

inline CommandResult cmd_probe(const RunConfig& c) {
  const double tol = cmd::positive_tol(c, 1e-8);
  const std::string fmt = cmd::format_or(c, "json");
  if (c.alpha.size() > 1) throw UsageError("probe takes a single --alpha");
  if (c.levels < 0) throw UsageError("--levels must be nonnegative");
  ProbeOptions opt;
  opt.alpha = c.alpha.empty() ? 0.5 : c.alpha.front();
  const ElasticParameter p(opt.alpha);
  opt.radius = c.radius;
  opt.levels = c.levels;
  opt.tol = tol;
  cmd::json config{{"alpha", opt.alpha}, {"levels", opt.levels}, {"radius", opt.radius}, {"tol", tol}};
  VoxelDomain dom;
  if (!c.voxfile.empty()) {
    dom = cmd::load_voxfile(c.voxfile);
    config["voxfile"] = c.voxfile;
  } else {
    dom = cmd::fixture_domain(c.fixture, c.n);
    config["fixture"] = c.fixture;
    config["n"] = c.n;
  }
  const ProbeResult r = run_probe(dom, opt);
  CommandResult out;
  out.exit_code = r.report.status == "no-decay" ? exit_check_failed : exit_ok;
  const std::string profile = probe_csv(r);
  if (fmt == "csv") {
    out.output = profile;
    return out;
  }
  cmd::json j = cmd::envelope(
      "probe", config,
      {{"lame_relative_residual", tol}, {"capacity_relative_residual", opt.wiener.capacity.tol}});
  const auto& d = r.report;
  j["solver"] = {{"iterations", r.iterations}, {"residual", r.residual}};
  j["report"] = {{"radii", d.radii},
                 {"m_rho", d.m_rho},
                 {"M_rho", d.M_rho},
                 {"phi_rho", d.phi_rho},
                 {"psi_rho", d.psi_rho},
                 {"wiener_partials", d.wiener_partials},
                 {"fitted_c2", d.fitted_c2},
                 {"fit_residual", d.fit_residual},
                 {"status", d.status}};
  cmd::json levels = cmd::json::array();
  for (const auto& w : r.wiener.levels)
    levels.push_back({{"level", w.level},
                      {"rho", w.rho},
                      {"cap_ball", w.cap_ball},
                      {"cap_annulus", w.cap_annulus},
                      {"gamma", w.gamma},
                      {"partial_sum", w.partial_sum}});
  j["wiener"] = {{"levels", levels}, {"a_grid", r.wiener.a_grid}};
  cmd::json cacc = cmd::json::array();
  for (const auto& q : r.caccioppoli) cacc.push_back({{"first", q.first}, {"second", q.second}, {"ratio", q.ratio()}});
  j["caccioppoli"] = cacc;
  out.output = cmd::dump(j);
  out.sidecar = profile;
  return out;
}

inline CommandResult cmd_search(const RunConfig& c) {
  const std::string fmt = cmd::format_or(c, "json");
  if (fmt != "json") throw UsageError("search writes JSON only");
  if (c.alpha.size() > 1) throw UsageError("search takes a single --alpha");
  if (c.budget < 1) throw UsageError("--budget must be positive");
  const ElasticParameter p(c.alpha.empty() ? 1.0 : c.alpha.front());
  SearchOptions opt;
  opt.budget = c.budget;
  opt.seed = c.seed;
  const SearchResult r = counterexample_search(p, opt);
  cmd::json j = cmd::envelope("search", {{"alpha", p.alpha()}, {"budget", c.budget}, {"seed", c.seed}},
                              {{"negative_threshold", opt.threshold}});
  j["result"] = {{"found", r.field.has_value()},
                 {"evaluations", r.evaluations},
                 {"best_ratio", r.best_ratio},
                 {"best_lhs_default", r.best_lhs_default},
                 {"best_lhs_refined", r.best_lhs_refined},
                 {"best_worker_seed", r.best_worker_seed},
                 {"inside_proven_interval", inside_proven_interval(p.alpha())},
                 {"best_field", cmd::field_json(r.best)}};
  CommandResult out;
  out.output = cmd::dump(j);
  return out;
}

inline CommandResult cmd_fixture(const RunConfig& c) {
  const VoxelDomain d = cmd::fixture_domain(c.fixture, c.n);
  std::ostringstream os;
  write_voxdom(os, d);
  return CommandResult{exit_ok, os.str(), {}, {}};
}

/// Runs the configured command, mapping library errors to exit codes.
inline CommandResult run_command(const RunConfig& c) {
  try {
    if (c.command == "region") return cmd_region(c);
    if (c.command == "form") return cmd_form(c);
    if (c.command == "capacity") return cmd_capacity(c);
    if (c.command == "probe") return cmd_probe(c);
    if (c.command == "search") return cmd_search(c);
    if (c.command == "fixture") return cmd_fixture(c);
    throw UsageError("unknown command '" + c.command + "'");
  } catch (const BracketFailure& e) {
    return {exit_check_failed, {}, {}, e.what()};
  } catch (const NoConvergence& e) {
    return {exit_check_failed, {}, {}, e.what()};
  } catch (const Error& e) {
    return {exit_usage, {}, {}, e.what()};
  }
}

}  // namespace lamelab
