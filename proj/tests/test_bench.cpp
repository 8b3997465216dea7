#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <type_traits>

#include "nsdg/bench.hpp"

using namespace nsdg;

namespace {

// Fourth-order central differences of a time-dependent field.
template <class F>
auto d_dx(const F& f, double t, const Vec2& x, int dir, double h) {
  using R = std::decay_t<decltype(f(t, x))>;
  const Vec2 e = dir == 0 ? Vec2(h, 0) : Vec2(0, h);
  return R((-f(t, x + 2 * e) + 8.0 * f(t, x + e) - 8.0 * f(t, x - e) + f(t, x - 2 * e)) / (12 * h));
}

template <class F>
auto d2_dx(const F& f, double t, const Vec2& x, int dir, double h) {
  using R = std::decay_t<decltype(f(t, x))>;
  const Vec2 e = dir == 0 ? Vec2(h, 0) : Vec2(0, h);
  return R((-f(t, x + 2 * e) + 16.0 * f(t, x + e) - 30.0 * f(t, x) + 16.0 * f(t, x - e) - f(t, x - 2 * e)) /
           (12 * h * h));
}

// Pointwise residuals of the momentum and continuity equations.
std::pair<double, double> ns_residual(const BenchmarkSpec& s, double t, const Vec2& x) {
  const double h = 1e-3;
  const auto& u = s.u_exact;
  const Vec2 ux = d_dx(u, t, x, 0, h), uy = d_dx(u, t, x, 1, h);
  const Vec2 lap = d2_dx(u, t, x, 0, h) + d2_dx(u, t, x, 1, h);
  const double px = d_dx(s.p_exact, t, x, 0, h), py = d_dx(s.p_exact, t, x, 1, h);
  const Vec2 ut = (-u(t + 2 * h, x) + 8.0 * u(t + h, x) - 8.0 * u(t - h, x) + u(t - 2 * h, x)) / (12 * h);
  const Vec2 v = u(t, x);
  const Vec2 f = s.f ? s.f(t, x) : Vec2(0, 0);
  const Vec2 dt = s.dynamic ? ut : Vec2(0, 0);
  const Vec2 mom = dt + v[0] * ux + v[1] * uy + Vec2(px, py) - s.nu * lap - f;
  return {mom.norm(), ux[0] + uy[1]};
}

}  // namespace

TEST_CASE("make_benchmark: definitions") {
  const auto tg = make_benchmark("taylor-green");
  CHECK(tg.dynamic);
  CHECK(tg.nu == 0.01);
  CHECK(tg.T == 1.0);
  CHECK(tg.tau == 0.01);
  CHECK(tg.x1 == doctest::Approx(2 * M_PI));
  const Vec2 u = tg.u_exact(0.0, Vec2(M_PI / 2, 0.0));
  CHECK(u[0] == doctest::Approx(1.0));
  CHECK(u[1] == doctest::Approx(0.0));

  const auto k = make_benchmark("kovasznay");
  CHECK_FALSE(k.dynamic);
  CHECK(k.nu == 0.025);
  const double lam = 1 / (2 * 0.025) - std::sqrt(1 / (4 * 0.025 * 0.025) + 4 * M_PI * M_PI);
  CHECK(lam == doctest::Approx(-0.9637405).epsilon(1e-6));
  CHECK(k.p_exact(0, Vec2(0.3, 0.7)) == doctest::Approx(-0.5 * std::exp(2 * lam * 0.3)));

  const auto cav = make_benchmark("cavity");
  CHECK_FALSE(cav.has_exact());
  CHECK(cav.g(0, Vec2(0.5, 1.0), 3) == Vec2(1, 0));
  CHECK(cav.g(0, Vec2(0.5, 0.0), 1) == Vec2(0, 0));
  CHECK(cav.g(0, Vec2(1.0, 0.5), 2) == Vec2(0, 0));
  BenchmarkOverrides re;
  re.Re = 400;
  CHECK(make_benchmark("cavity", re).nu == doctest::Approx(1.0 / 400));

  BenchmarkOverrides hom;
  hom.homogeneous = true;
  const auto th = make_benchmark("taylor-green", hom);
  CHECK(th.g.zero());
  CHECK_FALSE(th.f);
  CHECK(th.u_initial);

  try {
    make_benchmark("channel");
    FAIL("expected rejection");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find("channel") != std::string::npos);
    for (const auto& n : benchmark_names()) CHECK(msg.find(n) != std::string::npos);
  }
}

TEST_CASE("analytic benchmark fields solve the Navier-Stokes equations") {
  std::mt19937 rng(7);
  for (const auto& name : {"taylor-green", "kovasznay", "potential", "manufactured"}) {
    const auto s = make_benchmark(name);
    std::uniform_real_distribution<double> ux(s.x0, s.x1), uy(s.y0, s.y1);
    double scale = 1.0;
    for (int i = 0; i < 20; ++i) {
      const Vec2 x(ux(rng), uy(rng));
      scale = std::max(scale, s.u_exact(0.3, x).squaredNorm());
      const auto [mom, div] = ns_residual(s, 0.3, x);
      CHECK_MESSAGE(mom <= 1e-8 * scale, std::string(name));
      CHECK_MESSAGE(std::abs(div) <= 1e-8 * std::sqrt(scale), std::string(name));
    }
  }
}

TEST_CASE("report CSV round trip and validation") {
  ConvergenceReport r;
  r.metadata["benchmark"] = "kovasznay";
  ReportRow a;
  a.scheme = "dg-n";
  a.k = 1;
  a.h_max = 0.1767766952966369;
  a.field_dofs = 100;
  a.system_dofs = 101;
  a.u_error = 1.234567890123e-5;
  a.p_error = 3e-4;
  a.wall_time = 0.5;
  ReportRow b = a;
  b.h_max /= 2;
  b.u_error = *a.u_error / 8;
  b.p_error.reset();
  ReportRow c = a;
  c.k = 2;
  c.failed = true;
  c.u_error.reset();
  c.p_error.reset();
  r.rows = {a, b, c};
  compute_orders(r.rows);
  CHECK(*r.rows[1].u_order == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_FALSE(r.rows[0].u_order);
  CHECK_FALSE(r.rows[1].p_order);
  CHECK_FALSE(r.all_solved());

  std::stringstream ss;
  write_report_csv(ss, r);
  const auto back = parse_report_csv(ss);
  CHECK(back.rows == r.rows);
  CHECK(back.metadata == r.metadata);

  std::istringstream bad("scheme,k\n");
  CHECK_THROWS(parse_report_csv(bad));
  std::stringstream trunc;
  write_report_csv(trunc, r);
  std::string text = trunc.str();
  text += "dg-n,1,0.1\n";
  std::istringstream tin(text);
  try {
    parse_report_csv(tin);
    FAIL("expected parse error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("line") != std::string::npos);
  }
}

TEST_CASE("convergence study: argument checks and a tiny Kovasznay run") {
  const auto s = make_benchmark("kovasznay");
  SchemeParams p;
  p.gamma = 10.0;
  CHECK_THROWS_AS(convergence_study(s, p, {{4}}, {0}), std::invalid_argument);
  int calls = 0;
  const auto rep = convergence_study(s, p, {{8}, {4}}, {0}, {}, [&](const RunResult&, const MeshParams&) { ++calls; });
  CHECK(calls == 2);
  REQUIRE(rep.rows.size() == 2);
  CHECK(rep.rows[0].h_max > rep.rows[1].h_max);
  CHECK(rep.all_solved());
  CHECK(*rep.rows[1].u_error < *rep.rows[0].u_error);
  CHECK(rep.rows[1].u_order.has_value());
  CHECK(rep.rows[0].system_dofs == rep.rows[0].field_dofs + 1);
}

TEST_CASE("run_benchmark: DG k=0 dof count and a short Taylor-Green run") {
  const auto s = make_benchmark("kovasznay");
  SchemeParams p;
  const auto r = run_benchmark(s, p, 0, {10});
  CHECK(r.system_dofs == 1401);
  CHECK(r.constraint_residual <= 1e-8);

  RunOptions o;
  o.T = 0.05;
  o.tau = 0.01;
  o.integrator = Integrator::GLRK2;
  const auto tg = run_benchmark(make_benchmark("taylor-green"), p, 0, {4}, o);
  CHECK(tg.energy.size() == 6);
  CHECK(tg.u_error.has_value());
  CHECK_FALSE(tg.p_error.has_value());
  o.integrator = Integrator::CN;
  const auto cn = run_benchmark(make_benchmark("taylor-green"), p, 0, {4}, o);
  CHECK(cn.p_time == doctest::Approx(0.045));
  CHECK(cn.p_error.has_value());
}

TEST_CASE("gamma sweep flags and centerlines") {
  const auto s = make_benchmark("potential");
  SchemeParams p;
  const auto sw = gamma_sweep(s, p, 1, {8}, {0.0, 10.0, 100.0});
  REQUIRE(sw.rows.size() == 3);
  CHECK(sw.rows[1].gamma == 10.0);
  bool dec = true;
  for (int i = 1; i < 3; ++i) dec = dec && sw.rows[i].u_error < sw.rows[i - 1].u_error;
  CHECK(sw.strictly_decreasing == dec);
  CHECK_THROWS_AS(gamma_sweep(make_benchmark("cavity"), p, 0, {4}, {0.0}), std::invalid_argument);

  const auto cav = run_benchmark(make_benchmark("cavity"), p, 0, {4});
  REQUIRE(cav.u);
  CHECK_THROWS_AS(eval_velocity_at(*cav.u, Vec2(2, 2)), std::out_of_range);
  const auto dir = std::filesystem::temp_directory_path() / "nsdg_centerlines_test";
  std::filesystem::create_directories(dir);
  write_centerlines(dir, *cav.u, 17);
  std::ifstream fu(dir / "centerline_u.csv"), fv(dir / "centerline_v.csv");
  std::string line;
  std::getline(fu, line);
  CHECK(line == "y,u");
  int n = 0;
  while (std::getline(fu, line)) ++n;
  CHECK(n == 17);
  std::getline(fv, line);
  CHECK(line == "x,v");
  std::filesystem::remove_all(dir);
}
