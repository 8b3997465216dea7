// ns-bench: run single benchmarks or convergence studies and write CSV/JSON reports.
#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nsdg/bench.hpp"
#include "nsdg/solver.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace nsdg;

namespace {

struct Settings {
  std::string benchmark = "taylor-green";
  std::string scheme = "dg-n";
  std::string tensor = "deviatoric";
  std::string integrator = "cn";
  std::optional<double> gamma;
  double gamma_gd = 0.0;
  std::optional<double> eta, zeta;
  std::optional<double> tau, T, nu, Re;
  bool homogeneous = false;
  std::optional<double> newton_tol;
  std::string out = "ns-bench-out";
};

SchemeParams scheme_params(const Settings& s) {
  SchemeParams p;
  p.scheme = parse_scheme(s.scheme);
  p.tensor = parse_tensor(s.tensor);
  p.gamma = s.gamma;
  p.gamma_gd = s.gamma_gd;
  p.eta = s.eta;
  p.zeta = s.zeta;
  return p;
}

BenchmarkSpec spec_for(const Settings& s) {
  BenchmarkOverrides ov;
  ov.nu = s.nu;
  ov.Re = s.Re;
  ov.T = s.T;
  ov.tau = s.tau;
  ov.homogeneous = s.homogeneous;
  return make_benchmark(s.benchmark, ov);
}

RunOptions run_options(const Settings& s) {
  RunOptions o;
  o.integrator = parse_integrator(s.integrator);
  if (s.newton_tol) {
    NewtonConfig c;
    c.abs_tol = c.rel_tol = *s.newton_tol;
    o.newton = c;
  }
  return o;
}

json settings_json(const Settings& s, const BenchmarkSpec& spec) {
  json j;
  j["benchmark"] = s.benchmark;
  j["scheme"] = s.scheme;
  j["tensor"] = s.tensor;
  j["nu"] = spec.nu;
  if (s.gamma) j["gamma"] = *s.gamma;
  j["gamma_gd"] = s.gamma_gd;
  if (s.eta) j["eta"] = *s.eta;
  if (s.zeta) j["zeta"] = *s.zeta;
  if (spec.dynamic) {
    j["integrator"] = s.integrator;
    j["tau"] = spec.tau;
    j["T"] = spec.T;
  }
  j["homogeneous"] = s.homogeneous;
  return j;
}

json environment_json() {
  json j;
  j["linear_solver"] = SparseLU().backend();
  j["compiler"] = __VERSION__;
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  j["created"] = buf;
  return j;
}

template <class F>
void write_file(const fs::path& path, F&& body) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path.string());
  body(os);
}

void add_common_options(CLI::App& app, Settings& s) {
  app.add_option("--benchmark", s.benchmark, "taylor-green|kovasznay|potential|cavity|manufactured");
  app.add_option("--scheme", s.scheme, "dg-n|dg-c|h1");
  app.add_option("--tensor", s.tensor, "grad|symgrad|deviatoric");
  app.add_option("--integrator", s.integrator, "cn|glrk1|glrk2|bdf2");
  app.add_option("--gamma", s.gamma, "normal-jump penalty (DG)");
  app.add_option("--gamma-gd", s.gamma_gd, "grad-div penalty");
  app.add_option("--eta", s.eta, "interior penalty (DG)");
  app.add_option("--zeta", s.zeta, "upwind weight (DG)");
  app.add_option("--tau", s.tau, "time step");
  app.add_option("--T", s.T, "final time");
  app.add_option("--nu", s.nu, "viscosity override");
  app.add_option("--Re", s.Re, "Reynolds number (nu = 1/Re)");
  app.add_flag("--homogeneous", s.homogeneous, "f = 0 and g = 0");
  app.add_option("--newton-tol", s.newton_tol, "Newton absolute and relative tolerance");
  app.add_option("--out", s.out, "output directory");
}

int do_run(const Settings& s, int k, int nx, int ny) {
  const auto spec = spec_for(s);
  const auto params = scheme_params(s);
  const auto opts = run_options(s);
  const fs::path out = s.out;
  fs::create_directories(out);

  json meta;
  meta["mode"] = "run";
  meta["settings"] = settings_json(s, spec);
  meta["settings"]["k"] = k;
  meta["settings"]["nx"] = nx;
  meta["settings"]["ny"] = ny > 0 ? ny : nx;
  meta["environment"] = environment_json();

  ConvergenceReport rep;
  ReportRow row;
  row.scheme = to_string(params.scheme);
  row.k = k;
  int status = 0;
  try {
    const auto r = run_benchmark(spec, params, k, MeshParams{nx, ny}, opts);
    row.h_max = r.h_max;
    row.field_dofs = r.field_dofs;
    row.system_dofs = r.system_dofs;
    row.u_error = r.u_error;
    row.p_error = r.p_error;
    row.wall_time = r.wall_time;
    write_file(out / "energy.csv", [&](std::ostream& os) { write_energy_csv(os, r.energy); });
    if (!r.newton_trace.empty())
      write_file(out / "newton.csv", [&](std::ostream& os) { write_newton_trace_csv(os, r.newton_trace); });
    if (spec.name == "cavity") write_centerlines(out, *r.u);
    json res;
    res["h_max"] = r.h_max;
    res["field_dofs"] = r.field_dofs;
    res["system_dofs"] = r.system_dofs;
    if (r.u_error) res["u_error"] = *r.u_error;
    if (r.p_error) res["p_error"] = *r.p_error;
    if (spec.dynamic) res["p_time"] = r.p_time;
    res["newton_iterations"] = r.newton_iterations;
    if (!spec.dynamic) res["constraint_residual"] = r.constraint_residual;
    res["wall_time"] = r.wall_time;
    meta["result"] = res;
    std::cout << spec.name << ' ' << row.scheme << " k=" << k << " h=" << r.h_max;
    if (r.u_error) std::cout << " u_error=" << *r.u_error;
    if (r.p_error) std::cout << " p_error=" << *r.p_error;
    std::cout << " time=" << r.wall_time << "s\n";
  } catch (const std::exception& e) {
    row.failed = true;
    meta["failure"] = e.what();
    if (const auto* sf = dynamic_cast<const StepFailure*>(&e))
      write_file(out / "newton.csv", [&](std::ostream& os) { write_newton_trace_csv(os, sf->trace); });
    if (const auto* nc = dynamic_cast<const NonConvergence*>(&e))
      write_file(out / "newton.csv", [&](std::ostream& os) { write_newton_trace_csv(os, nc->trace); });
    std::cerr << "run failed: " << e.what() << '\n';
    status = 1;
  }
  rep.rows.push_back(row);
  write_file(out / "report.csv", [&](std::ostream& os) { write_report_csv(os, rep); });
  write_file(out / "run.json", [&](std::ostream& os) { os << meta.dump(2) << '\n'; });
  return status;
}

// Config keys mirror the run options; "k" and "nx" take lists, "meshes" may list {nx, ny} objects,
// and an optional "gammas" list adds a gamma sweep on the first k and finest mesh.
int do_study(const fs::path& config, const std::string& out_override) {
  std::ifstream is(config);
  if (!is) throw std::runtime_error("cannot open config " + config.string());
  const json cfg = json::parse(is);

  Settings s;
  const auto str = [&](const char* key, std::string& dst) {
    if (cfg.contains(key)) dst = cfg.at(key).get<std::string>();
  };
  const auto num = [&](const char* key, std::optional<double>& dst) {
    if (cfg.contains(key)) dst = cfg.at(key).get<double>();
  };
  for (const auto& [key, _] : cfg.items()) {
    static const std::vector<std::string> known = {"benchmark", "scheme", "tensor", "integrator", "gamma",
                                                   "gamma_gd", "eta", "zeta", "tau", "T", "nu", "Re",
                                                   "homogeneous", "newton_tol", "out", "k", "nx", "meshes",
                                                   "gammas", "grad_div"};
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw std::runtime_error("config: unknown key '" + key + "'");
  }
  str("benchmark", s.benchmark);
  str("scheme", s.scheme);
  str("tensor", s.tensor);
  str("integrator", s.integrator);
  str("out", s.out);
  if (!out_override.empty()) s.out = out_override;
  num("gamma", s.gamma);
  num("eta", s.eta);
  num("zeta", s.zeta);
  num("tau", s.tau);
  num("T", s.T);
  num("nu", s.nu);
  num("Re", s.Re);
  num("newton_tol", s.newton_tol);
  if (cfg.contains("gamma_gd")) s.gamma_gd = cfg.at("gamma_gd").get<double>();
  if (cfg.contains("homogeneous")) s.homogeneous = cfg.at("homogeneous").get<bool>();

  std::vector<int> ks;
  if (cfg.contains("k")) {
    const auto& k = cfg.at("k");
    ks = k.is_array() ? k.get<std::vector<int>>() : std::vector<int>{k.get<int>()};
  }
  std::vector<MeshParams> meshes;
  if (cfg.contains("nx"))
    for (int n : cfg.at("nx").get<std::vector<int>>()) meshes.push_back({n, -1});
  if (cfg.contains("meshes"))
    for (const auto& m : cfg.at("meshes")) meshes.push_back({m.at("nx").get<int>(), m.value("ny", -1)});
  if (ks.empty()) throw std::runtime_error("config: 'k' is required");

  const auto spec = spec_for(s);
  const auto params = scheme_params(s);
  const auto opts = run_options(s);
  const fs::path out = s.out;
  fs::create_directories(out);

  json meta;
  meta["mode"] = "study";
  meta["settings"] = settings_json(s, spec);
  meta["settings"]["k"] = ks;
  meta["environment"] = environment_json();
  json cells = json::array();

  EnergyTrace last_energy;
  auto rep = convergence_study(spec, params, meshes, ks, opts, [&](const RunResult& r, const MeshParams& m) {
    last_energy = r.energy;
    json c;
    c["k"] = r.k;
    c["nx"] = m.nx;
    c["ny"] = m.cells_y();
    c["newton_iterations"] = r.newton_iterations;
    if (!r.newton_trace.empty()) c["constraint_residual"] = r.constraint_residual;
    cells.push_back(c);
    write_file(out / ("energy_k" + std::to_string(r.k) + "_nx" + std::to_string(m.nx) + ".csv"),
               [&](std::ostream& os) { write_energy_csv(os, r.energy); });
  });
  meta["cells"] = cells;
  write_file(out / "report.csv", [&](std::ostream& os) { write_report_csv(os, rep); });
  write_file(out / "energy.csv", [&](std::ostream& os) { write_energy_csv(os, last_energy); });
  write_report_csv(std::cout, rep);

  int status = rep.all_solved() ? 0 : 1;
  if (cfg.contains("gammas")) {
    const bool gd = cfg.value("grad_div", false);
    auto finest = *std::max_element(meshes.begin(), meshes.end(), [](const MeshParams& a, const MeshParams& b) {
      return a.nx * a.cells_y() < b.nx * b.cells_y();
    });
    try {
      const auto sw = gamma_sweep(spec, params, ks.front(), finest, cfg.at("gammas").get<std::vector<double>>(), gd, opts);
      write_file(out / "gamma_sweep.csv", [&](std::ostream& os) {
        os.precision(17);
        os << (gd ? "gamma_gd" : "gamma") << ",u_error\n";
        for (const auto& r : sw.rows) os << r.gamma << ',' << r.u_error << '\n';
      });
      meta["gamma_sweep"] = {{"strictly_decreasing", sw.strictly_decreasing},
                             {"relative_variation", sw.relative_variation}};
    } catch (const std::exception& e) {
      meta["gamma_sweep"] = {{"failure", e.what()}};
      status = 1;
    }
  }
  meta["all_solved"] = status == 0;
  write_file(out / "run.json", [&](std::ostream& os) { os << meta.dump(2) << '\n'; });
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Navier-Stokes DG/CG benchmark driver"};
  app.require_subcommand(1);

  Settings run_settings;
  int k = 1, nx = 10, ny = -1;
  auto* run = app.add_subcommand("run", "run one benchmark cell");
  add_common_options(*run, run_settings);
  run->add_option("--k", k, "pressure degree (velocity degree k+1)")->required();
  run->add_option("--nx", nx, "cells in x")->required();
  run->add_option("--ny", ny, "cells in y (default nx)");

  std::string config, study_out;
  auto* study = app.add_subcommand("study", "convergence study from a JSON config");
  study->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
  study->add_option("--out", study_out, "output directory (overrides the config)");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) return do_run(run_settings, k, nx, ny);
    return do_study(config, study_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
