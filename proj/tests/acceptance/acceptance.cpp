// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>

#include <json.hpp>

#include "lamelab.hpp"
#include "lamelab/commands.hpp"

using namespace lamelab;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

int failures = 0;

void run(int number, double time_limit, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > time_limit) {
    o.pass = false;
    o.detail += fmt("; over the %.0f s limit", time_limit);
  }
  if (!o.pass) ++failures;
  std::printf("criterion %d: %s (%s; %.2f s)\n", number, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs);
  std::fflush(stdout);
}

Outcome region_roots() {
  const RegionReport r = region_report(1e-9);
  const bool ok = std::abs(r.alpha_plus - 1.524) <= 5e-3 && std::abs(r.alpha_minus + 0.194) <= 5e-3 &&
                  std::abs(r.alpha_minus_critical + 0.902) <= 5e-3 && std::abs(r.alpha_plus_critical - 39.450) <= 5e-2;
  return {ok, fmt("alpha_- %.6f, alpha_+ %.6f, critical %.6f and %.5f", r.alpha_minus, r.alpha_plus,
                  r.alpha_minus_critical, r.alpha_plus_critical)};
}

Outcome minor_chains() {
  double worst = 0.0;
  auto track = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
  };
  for (int k = 0; k < 100; ++k) {
    const double a = 0.01 + 0.45 * k;
    const MinorValues g = minors(b_plus(a)), w = closed_form_minors(FormKind::plus, a);
    track(g.p1, w.p1);
    track(g.p2, w.p2);
    track(*g.p3, *w.p3);
  }
  for (int k = 0; k < 100; ++k) {
    const double a = -0.995 + 0.00995 * k;
    const MinorValues g = minors(b_minus(a)), w = closed_form_minors(FormKind::minus, a);
    track(g.p1, w.p1);
    track(g.p2, w.p2);
  }
  return {worst <= 1e-9, fmt("worst relative difference %.2e over 200 alpha", worst)};
}

Outcome identity_suite() {
  const PolarGrid grid = PolarGrid::default_grid();
  const PolarGrid fine = grid.refined();
  const double alphas[] = {-0.1, 0.0, 0.5, 1.0, 1.5};
  double worst_rel = 0.0, min_shrink = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TestFieldSpec u = generate_test_field(seed);
    const FormMoments m0 = form_moments(u, grid), m1 = form_moments(u, fine);
    for (double a : alphas) {
      const ElasticParameter p(a);
      const FormReport r0 = report_from_moments(p, m0), r1 = report_from_moments(p, m1);
      worst_rel = std::max(worst_rel, std::abs(r0.residual) / r0.scale());
      const double shrink = std::abs(r0.residual) / std::max(std::abs(r1.residual), 1e-300);
      min_shrink = std::min(min_shrink, shrink);
      ok = ok && r0.passes(1e-6) && shrink >= 10.0;
    }
  }
  return {ok, fmt("100 cases, worst residual/scale %.2e, smallest refinement shrink %.1fx", worst_rel, min_shrink)};
}

Outcome split_suites() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u01(0.0, 1.0), sym(-1.0, 1.0);
  const PolarGrid grid = PolarGrid::default_grid();
  int orth_ok = 0, poin_ok = 0;
  double worst_orth = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const double a = sym(rng), b = sym(rng), c = 0.5 + 1.5 * u01(rng);
    const RadialProfile f = [=](double r) {
      const double e = std::exp(-c * r * r);
      return std::make_pair((a + b * r * r) * e, (2.0 * b * r - 2.0 * c * r * (a + b * r * r)) * e);
    };
    // zero-mean partner: a first- or second-degree harmonic times a Gaussian
    const Vec3 k{sym(rng), sym(rng), sym(rng)};
    const double q = sym(rng), d = 0.5 + u01(rng);
    const bool second = inst % 2 == 1;
    const ScalarField g = [=](const Vec3& x) {
      const double e = std::exp(-d * norm2(x));
      double p = dot(k, x);
      Vec3 dp = k;
      if (second) {
        p += q * (x[0] * x[0] - x[2] * x[2]) + x[0] * x[1];
        dp += Vec3{2.0 * q * x[0] + x[1], x[0], -2.0 * q * x[2]};
      }
      ScalarJet j;
      j.value = p * e;
      j.grad = (dp - x * (2.0 * d * p)) * e;
      return j;
    };
    const OrthogonalityResult res = orthogonality_check(f, g, grid, 1e-8);
    worst_orth = std::max({worst_orth, std::abs(res.value_integral), std::abs(res.gradient_integral)});
    orth_ok += res.orthogonal;
  }
  const SphereRule rule = SphereRule::default_rule();
  std::uniform_real_distribution<double> radius(0.05, 4.0);
  double tightest = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    const BumpField u(generate_test_field(500 + static_cast<std::uint64_t>(inst)));
    const auto s = split(u, rule);
    const InequalityPair p = poincare_sphere_check(s, radius(rng));
    poin_ok += p.holds(1e-9);
    if (p.rhs > 0.0) tightest = std::max(tightest, p.lhs / p.rhs);
  }
  return {orth_ok == 50 && poin_ok == 50,
          fmt("orthogonality %d/50 (largest integral %.1e), sphere Poincare %d/50 (largest lhs/rhs %.3f)", orth_ok,
              worst_orth, poin_ok, tightest)};
}

Outcome coercivity_suite() {
  FieldGenOptions gen;
  gen.origin_excluded = true;
  const PolarGrid grid = PolarGrid::default_grid();
  double worst_margin = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const FormMoments fm = form_moments(generate_test_field(seed, gen), grid);
    for (double a : {0.0, 0.5, 1.0}) {
      const ElasticParameter p(a);
      const double ratio = report_from_moments(p, fm).coercivity_ratio;
      worst_margin = std::min(worst_margin, ratio / (0.999 * coercivity_bound(p)));
    }
  }
  return {worst_margin >= 1.0, fmt("60 cases, smallest ratio / (0.999 bound) %.4f", worst_margin)};
}

Outcome necessary_condition() {
  const double q0 = necessary_q(-0.95), q1 = necessary_q(40.0), d = d2_minimum(40.0);
  return {q0 < 0.0 && q1 < 0.0 && d <= -9584.0 + 1e-6,
          fmt("q(-0.95) %.4f, q(40) %.1f, min d2 at 40 %.4f", q0, q1, d)};
}

Outcome capacity_suite() {
  const VoxelSet ball = ball_set(VoxelGrid::cube(Vec3{}, 4.0, 256), 0.5);
  const double c = capacity(ball).value;
  const double err = (c - 2.0 * pi) / (2.0 * pi);
  const VoxelGrid g = VoxelGrid::cube(Vec3{}, 4.0, 32);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ctr(-0.35, 0.35), rad(0.1, 0.25);
  int mono = 0, sub = 0;
  for (int pair = 0; pair < 10; ++pair) {
    const VoxelSet a = ball_set(g, rad(rng), Vec3{ctr(rng), ctr(rng), ctr(rng)});
    const VoxelSet b = ball_set(g, rad(rng), Vec3{ctr(rng), ctr(rng), ctr(rng)});
    VoxelSet u = a;
    for (std::size_t p = 0; p < u.member.size(); ++p) u.member[p] |= b.member[p];
    const double ca = capacity(a).value, cb = capacity(b).value, cu = capacity(u).value;
    mono += ca <= cu * (1.0 + 1e-9) && cb <= cu * (1.0 + 1e-9);
    sub += cu <= (ca + cb) * (1.0 + 1e-9);
  }
  return {std::abs(err) <= 0.05 && mono == 10 && sub == 10,
          fmt("cap(B_0.5) %.5f at h 1/64 (%+.2f%%), monotone %d/10, subadditive %d/10", c, 100.0 * err, mono, sub)};
}

Outcome half_space_wiener() {
  const VoxelDomain d = rasterize(HalfSpaceComplement{}, fixture_grid(128));
  const WienerProfile w = wiener_profile(d, 0.5, 3);
  double mean = 0.0;
  for (const auto& lv : w.levels) mean += lv.gamma;
  mean /= static_cast<double>(w.levels.size());
  double spread = 0.0;
  std::vector<double> x, y;
  for (const auto& lv : w.levels) {
    spread = std::max(spread, std::abs(lv.gamma - mean) / mean);
    x.push_back(lv.level);
    y.push_back(lv.partial_sum);
  }
  const LineFit f = fit_line(x, y);
  return {spread <= 0.15 && f.r_squared >= 0.999,
          fmt("gamma %.4f to %.4f (spread %.2e), partial sums slope %.4f r^2 %.8f", w.levels.front().gamma,
              w.levels.back().gamma, spread, f.slope, f.r_squared)};
}

RunConfig probe_config() {
  RunConfig c;
  c.command = "probe";
  c.fixture = "cone";
  c.n = 128;
  c.alpha = {0.5};
  c.levels = 3;
  return c;
}

Outcome cone_decay() {
  const CommandResult r = run_command(probe_config());
  if (r.exit_code != exit_ok) return {false, "probe exited with " + std::to_string(r.exit_code) + ": " + r.error};
  const auto j = nlohmann::json::parse(r.output);
  const auto phi = j["report"]["phi_rho"].get<std::vector<double>>();
  const double c2 = j["report"]["fitted_c2"].get<double>();
  bool monotone = phi.size() >= 4;
  for (std::size_t i = 1; i < phi.size(); ++i) monotone = monotone && phi[i] < phi[i - 1];
  const ManufacturedResult m16 = manufactured_error(0.5, 16), m32 = manufactured_error(0.5, 32),
                           m64 = manufactured_error(0.5, 64);
  const double order = std::log2(m32.max_error / m64.max_error);
  const double order_coarse = std::log2(m16.max_error / m32.max_error);
  return {monotone && c2 > 0.0 && order >= 1.7,
          fmt("phi %.3e > %.3e > %.3e > %.3e, c2 %.4f, status %s, manufactured order %.2f then %.2f", phi[0],
              phi[1], phi[2], phi[3], c2, j["report"]["status"].get<std::string>().c_str(), order_coarse, order)};
}

Outcome reproducible() {
  std::vector<RunConfig> runs;
  RunConfig c;
  c.command = "region";
  c.tol = 1e-9;
  runs.push_back(c);
  c = RunConfig{};
  c.command = "form";
  c.alpha = {0.0, 1.0};
  c.seeds = 3;
  c.seed = 11;
  runs.push_back(c);
  c = RunConfig{};
  c.command = "capacity";
  c.ball = 0.5;
  c.h = "1/16";
  runs.push_back(c);
  c = RunConfig{};
  c.command = "search";
  c.alpha = {1.0};
  c.budget = 60;
  c.seed = 3;
  runs.push_back(c);
  runs.push_back(probe_config());
  int same = 0;
  std::string differing;
  for (const auto& rc : runs) {
    ::setenv("LAMELAB_THREADS", "1", 1);
    const CommandResult a = run_command(rc);
    ::setenv("LAMELAB_THREADS", "3", 1);
    const CommandResult b = run_command(rc);
    ::unsetenv("LAMELAB_THREADS");
    if (a.exit_code == b.exit_code && a.output == b.output && a.sidecar == b.sidecar && !a.output.empty())
      ++same;
    else
      differing += " " + rc.command;
  }
  return {same == static_cast<int>(runs.size()),
          fmt("%d/%zu commands byte-identical across repeated runs%s", same, runs.size(), differing.c_str())};
}

}  // namespace

int main() {
  run(1, 1.0, region_roots);
  run(2, 1.0, minor_chains);
  run(3, 300.0, identity_suite);
  run(4, 60.0, split_suites);
  run(5, 300.0, coercivity_suite);
  run(6, 1.0, necessary_condition);
  run(7, 120.0, capacity_suite);
  run(8, 300.0, half_space_wiener);
  run(9, 900.0, cone_decay);
  run(10, 1800.0, reproducible);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
