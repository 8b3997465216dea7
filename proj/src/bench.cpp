#include "nsdg/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace nsdg {

namespace {

constexpr double kPi = std::numbers::pi;

BenchmarkSpec taylor_green() {
  BenchmarkSpec s;
  s.name = "taylor-green";
  s.x0 = 0.0, s.x1 = 2 * kPi, s.y0 = 0.0, s.y1 = 2 * kPi;
  s.nu = 0.01;
  s.dynamic = true;
  s.T = 1.0;
  s.tau = 0.01;
  return s;
}

void finish_taylor_green(BenchmarkSpec& s) {
  const double nu = s.nu;
  s.u_exact = [nu](double t, const Vec2& x) {
    const double d = std::exp(-2 * nu * t);
    return Vec2(std::sin(x[0]) * std::cos(x[1]) * d, -std::cos(x[0]) * std::sin(x[1]) * d);
  };
  s.p_exact = [nu](double t, const Vec2& x) {
    return 0.25 * (std::cos(2 * x[0]) + std::cos(2 * x[1])) * std::exp(-4 * nu * t);
  };
}

double kovasznay_lambda(double nu) { return 1.0 / (2 * nu) - std::sqrt(1.0 / (4 * nu * nu) + 4 * kPi * kPi); }

void finish_kovasznay(BenchmarkSpec& s) {
  const double lam = kovasznay_lambda(s.nu);
  s.u_exact = [lam](double, const Vec2& x) {
    const double e = std::exp(lam * x[0]);
    return Vec2(1.0 - e * std::cos(2 * kPi * x[1]), lam / (2 * kPi) * e * std::sin(2 * kPi * x[1]));
  };
  s.p_exact = [lam](double, const Vec2& x) { return -0.5 * std::exp(2 * lam * x[0]); };
}

void finish_potential(BenchmarkSpec& s) {
  s.u_exact = [](double, const Vec2& x) {
    const double a = x[0], b = x[1];
    return Vec2(5 * std::pow(a, 4) - 30 * a * a * b * b + 5 * std::pow(b, 4),
                -20 * a * a * a * b + 20 * a * b * b * b);
  };
  s.p_exact = [u = s.u_exact](double t, const Vec2& x) { return -0.5 * u(t, x).squaredNorm(); };
}

// u = sin^2(t) s(x), p = sin^2(t) cos x cos y on [0, pi]^2; starts from rest with f(0) = 0.
void finish_manufactured(BenchmarkSpec& s) {
  const double nu = s.nu;
  auto shape = [](const Vec2& x) {
    const double sx = std::sin(x[0]), sy = std::sin(x[1]);
    return Vec2(sx * sx * std::sin(2 * x[1]), -std::sin(2 * x[0]) * sy * sy);
  };
  s.u_exact = [shape](double t, const Vec2& x) { return Vec2(std::sin(t) * std::sin(t) * shape(x)); };
  s.p_exact = [](double t, const Vec2& x) { return std::sin(t) * std::sin(t) * std::cos(x[0]) * std::cos(x[1]); };
  s.f = [nu, shape](double t, const Vec2& x) {
    const double a = std::sin(t) * std::sin(t), da = std::sin(2 * t);
    const double s2x = std::sin(2 * x[0]), s2y = std::sin(2 * x[1]);
    const double c2x = std::cos(2 * x[0]), c2y = std::cos(2 * x[1]);
    const Vec2 sv = shape(x);
    Mat2 grad;  // grad(i, j) = d s_i / d x_j
    grad << s2x * s2y, (1 - c2x) * c2y, -c2x * (1 - c2y), -s2x * s2y;
    const Vec2 lap(s2y * (4 * c2x - 2), -s2x * (4 * c2y - 2));
    const Vec2 gp(-std::sin(x[0]) * std::cos(x[1]), -std::cos(x[0]) * std::sin(x[1]));
    return Vec2(da * sv + a * a * (grad * sv) + a * gp - nu * a * lap);
  };
}

}  // namespace

std::vector<std::string> benchmark_names() { return {"taylor-green", "kovasznay", "potential", "cavity", "manufactured"}; }

BenchmarkSpec make_benchmark(const std::string& name, const BenchmarkOverrides& ov) {
  BenchmarkSpec s;
  if (name == "taylor-green") {
    s = taylor_green();
  } else if (name == "kovasznay") {
    s.name = name;
    s.x0 = -0.5, s.x1 = 1.5, s.y0 = 0.0, s.y1 = 2.0;
    s.nu = 0.025;
  } else if (name == "potential") {
    s.name = name;
    s.x0 = -1.0, s.x1 = 1.0, s.y0 = -1.0, s.y1 = 1.0;
    s.nu = 0.025;
  } else if (name == "cavity") {
    s.name = name;
    s.nu = 0.01;
  } else if (name == "manufactured") {
    s.name = name;
    s.x0 = 0.0, s.x1 = kPi, s.y0 = 0.0, s.y1 = kPi;
    s.nu = 0.05;
    s.dynamic = true;
    s.T = 1.0;
    s.tau = 0.1;
  } else {
    std::string list;
    for (const auto& n : benchmark_names()) list += (list.empty() ? "" : ", ") + n;
    throw std::invalid_argument("unknown benchmark '" + name + "'; valid names: " + list);
  }

  if (ov.Re) {
    if (*ov.Re <= 0) throw std::invalid_argument("Re must be positive");
    s.nu = 1.0 / *ov.Re;
  }
  if (ov.nu) {
    if (*ov.nu <= 0) throw std::invalid_argument("nu must be positive");
    s.nu = *ov.nu;
  }
  if (ov.T) s.T = *ov.T;
  if (ov.tau) s.tau = *ov.tau;

  if (name == "taylor-green") finish_taylor_green(s);
  if (name == "kovasznay") finish_kovasznay(s);
  if (name == "potential") finish_potential(s);
  if (name == "manufactured") finish_manufactured(s);
  if (name == "cavity") {
    const double top = s.y1;
    s.g.g = [top](double, const Vec2& x, int) { return x[1] >= top - 1e-12 ? Vec2(1.0, 0.0) : Vec2(0.0, 0.0); };
  } else {
    s.g.g = [u = s.u_exact](double t, const Vec2& x, int) { return u(t, x); };
  }
  s.u_initial = s.u_exact;

  if (ov.homogeneous) {
    s.f = {};
    s.g = {};
    s.u_exact = {};
    s.p_exact = {};
  }
  return s;
}

RunResult run_benchmark(const BenchmarkSpec& spec, const SchemeParams& params, int k, const MeshParams& mp,
                        const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  auto mesh = std::make_shared<const Mesh>(
      build_rect_mesh(spec.x0, spec.x1, spec.y0, spec.y1, mp.nx, mp.cells_y()));
  SchemeParams prm = params;
  prm.nu = spec.nu;
  prm.validate();
  const auto sp = make_spaces(mesh, prm.scheme, k);
  Forms forms(sp.velocity, sp.pressure, prm);

  RunResult r;
  r.benchmark = spec.name;
  r.scheme = prm.scheme;
  r.k = k;
  r.h_max = mesh->h_max();
  r.field_dofs = forms.nv() + forms.nq();
  r.system_dofs = r.field_dofs + 1;

  NewtonConfig newton;
  if (spec.dynamic) newton.abs_tol = newton.rel_tol = 1e-8;
  TimeStepper stepper(forms, spec.f, spec.g, opt.newton.value_or(newton));
  Vector u, p;
  double t_end = 0.0;
  if (spec.dynamic) {
    TimeLoopConfig cfg;
    cfg.tau = opt.tau.value_or(spec.tau);
    cfg.T = opt.T.value_or(spec.T);
    cfg.integrator = opt.integrator;
    if (!spec.u_initial) throw std::invalid_argument("dynamic benchmark without initial data");
    const auto u0 = l2_project([&](const Vec2& x) { return spec.u_initial(0.0, x); }, sp.velocity, opt.error_quadrature);
    auto res = integrate(stepper, u0.coeffs, cfg);
    u = std::move(res.u);
    p = std::move(res.p);
    r.p_time = res.p_time;
    r.energy = std::move(res.energy);
    r.newton_iterations = res.newton_iterations;
    t_end = cfg.steps() * cfg.tau;
  } else {
    auto res = stepper.steady_solve(0.0);
    u = std::move(res.u);
    p = std::move(res.p);
    r.newton_trace = std::move(res.trace);
    r.newton_iterations = r.newton_trace.empty() ? 0 : r.newton_trace.back().iteration;
    r.constraint_residual = res.constraint_residual;
    r.energy.push_back({0, 0.0, forms.energy(u)});
  }

  r.u = FieldVec(sp.velocity, u, FieldRole::Velocity);
  r.p = FieldVec(sp.pressure, p, FieldRole::Pressure);
  if (spec.u_exact) {
    r.u_error = l2_error(*r.u, [&](const Vec2& x) { return spec.u_exact(t_end, x); }, opt.error_quadrature);
    const bool report_p = !(spec.dynamic && opt.integrator == Integrator::GLRK2);
    if (spec.p_exact && report_p) {
      const double tp = spec.dynamic ? r.p_time : 0.0;
      r.p_error = l2_error(*r.p, [&](const Vec2& x) { return spec.p_exact(tp, x); }, opt.error_quadrature);
    }
  }
  r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

bool ConvergenceReport::all_solved() const {
  return std::none_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.failed; });
}

void compute_orders(std::vector<ReportRow>& rows) {
  auto order = [](const std::optional<double>& e1, const std::optional<double>& e2, double h1, double h2)
      -> std::optional<double> {
    if (!e1 || !e2 || *e1 <= 0 || *e2 <= 0 || h1 == h2) return std::nullopt;
    return std::log(*e1 / *e2) / std::log(h1 / h2);
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].u_order.reset();
    rows[i].p_order.reset();
    if (i == 0 || rows[i - 1].k != rows[i].k || rows[i].failed || rows[i - 1].failed) continue;
    rows[i].u_order = order(rows[i - 1].u_error, rows[i].u_error, rows[i - 1].h_max, rows[i].h_max);
    rows[i].p_order = order(rows[i - 1].p_error, rows[i].p_error, rows[i - 1].h_max, rows[i].h_max);
  }
}

ConvergenceReport convergence_study(const BenchmarkSpec& spec, const SchemeParams& params,
                                    const std::vector<MeshParams>& meshes, const std::vector<int>& ks,
                                    const RunOptions& options, const CellCallback& on_cell) {
  if (meshes.size() < 2) throw std::invalid_argument("convergence_study needs at least 2 meshes");
  if (ks.empty()) throw std::invalid_argument("convergence_study needs at least one k");

  std::vector<MeshParams> sorted = meshes;
  // Coarse to fine: h decreases as the cell count grows.
  std::stable_sort(sorted.begin(), sorted.end(), [](const MeshParams& a, const MeshParams& b) {
    return a.nx * a.cells_y() < b.nx * b.cells_y();
  });
  std::vector<int> ksorted = ks;
  std::sort(ksorted.begin(), ksorted.end());

  ConvergenceReport rep;
  for (int k : ksorted) {
    for (const auto& m : sorted) {
      ReportRow row;
      row.scheme = to_string(params.scheme);
      row.k = k;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto r = run_benchmark(spec, params, k, m, options);
        row.h_max = r.h_max;
        row.field_dofs = r.field_dofs;
        row.system_dofs = r.system_dofs;
        row.u_error = r.u_error;
        row.p_error = r.p_error;
        row.wall_time = r.wall_time;
        if (on_cell) on_cell(r, m);
      } catch (const std::exception&) {
        row.failed = true;
        row.h_max = build_rect_mesh(spec.x0, spec.x1, spec.y0, spec.y1, m.nx, m.cells_y()).h_max();
        row.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }
      rep.rows.push_back(row);
    }
  }
  compute_orders(rep.rows);

  std::ostringstream nu;
  nu.precision(17);
  nu << spec.nu;
  rep.metadata["benchmark"] = spec.name;
  rep.metadata["scheme"] = to_string(params.scheme);
  rep.metadata["tensor"] = to_string(params.effective_tensor());
  rep.metadata["nu"] = nu.str();
  if (spec.dynamic) rep.metadata["integrator"] = to_string(options.integrator);
  return rep;
}

GammaSweep gamma_sweep(const BenchmarkSpec& spec, SchemeParams params, int k, const MeshParams& mesh,
                       const std::vector<double>& gammas, bool grad_div, const RunOptions& options) {
  if (!spec.has_exact()) throw std::invalid_argument("gamma_sweep needs an exact solution");
  GammaSweep out;
  for (double g : gammas) {
    if (grad_div)
      params.gamma_gd = g;
    else
      params.gamma = g;
    const auto r = run_benchmark(spec, params, k, mesh, options);
    out.rows.push_back({g, *r.u_error});
  }
  out.strictly_decreasing = out.rows.size() >= 2;
  double lo = out.rows.empty() ? 0.0 : out.rows.front().u_error, hi = lo;
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (i > 0 && !(out.rows[i].u_error < out.rows[i - 1].u_error)) out.strictly_decreasing = false;
    lo = std::min(lo, out.rows[i].u_error);
    hi = std::max(hi, out.rows[i].u_error);
  }
  out.relative_variation = lo > 0 ? (hi - lo) / lo : 0.0;
  return out;
}

Vec2 eval_velocity_at(const FieldVec& u, const Vec2& x) {
  const auto& mesh = u.space->mesh();
  constexpr double tol = 1e-12;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto map = element_map(mesh, e);
    const Vec2 r = map.to_reference(x);
    if (r[0] >= -tol && r[1] >= -tol && r[0] + r[1] <= 1 + tol) {
      const Vector v = eval_field(u, e, r);
      return Vec2(v(0), v(1));
    }
  }
  throw std::out_of_range("eval_velocity_at: point outside the mesh");
}

void write_centerlines(const std::filesystem::path& dir, const FieldVec& u, int samples) {
  if (samples < 2) throw std::invalid_argument("write_centerlines: need at least 2 samples");
  std::filesystem::create_directories(dir);
  const auto& mesh = u.space->mesh();
  const Vec2 lo = mesh.bbox_min(), hi = mesh.bbox_max();
  const double xm = 0.5 * (lo[0] + hi[0]), ym = 0.5 * (lo[1] + hi[1]);

  std::ofstream fu(dir / "centerline_u.csv");
  fu.precision(12);
  fu << "y,u\n";
  for (int i = 0; i < samples; ++i) {
    const double y = lo[1] + (hi[1] - lo[1]) * i / (samples - 1);
    fu << y << ',' << eval_velocity_at(u, Vec2(xm, y))[0] << '\n';
  }
  std::ofstream fv(dir / "centerline_v.csv");
  fv.precision(12);
  fv << "x,v\n";
  for (int i = 0; i < samples; ++i) {
    const double x = lo[0] + (hi[0] - lo[0]) * i / (samples - 1);
    fv << x << ',' << eval_velocity_at(u, Vec2(x, ym))[1] << '\n';
  }
  if (!fu || !fv) throw std::runtime_error("write_centerlines: cannot write to " + dir.string());
}

}  // namespace nsdg
