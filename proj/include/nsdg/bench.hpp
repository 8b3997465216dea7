#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nsdg/forms.hpp"
#include "nsdg/timeint.hpp"

namespace nsdg {

using ExactVelocity = std::function<Vec2(double, const Vec2&)>;
using ExactPressure = std::function<double(double, const Vec2&)>;

struct BenchmarkSpec {
  std::string name;
  double x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  double nu = 1.0;
  bool dynamic = false;
  double T = 0.0, tau = 0.0;
  ExactVelocity u_exact;    // empty when unknown
  ExactVelocity u_initial;  // initial data for dynamic runs
  ExactPressure p_exact;
  SourceFunction f;
  BoundaryData g;

  bool has_exact() const { return static_cast<bool>(u_exact); }
};

struct BenchmarkOverrides {
  std::optional<double> nu;
  std::optional<double> Re;  // cavity: nu = 1/Re
  std::optional<double> T;
  std::optional<double> tau;
  bool homogeneous = false;  // f = 0 and g = 0 (energy tests)
};

std::vector<std::string> benchmark_names();
BenchmarkSpec make_benchmark(const std::string& name, const BenchmarkOverrides& overrides = {});

struct MeshParams {
  int nx = 10;
  int ny = -1;  // -1: same as nx
  int cells_y() const { return ny > 0 ? ny : nx; }
};

struct RunOptions {
  Integrator integrator = Integrator::CN;
  std::optional<double> tau, T;
  std::optional<NewtonConfig> newton;  // default: 1e-8 dynamic, 1e-10 stationary
  int error_quadrature = 12;
};

struct RunResult {
  std::string benchmark;
  Scheme scheme = Scheme::DgN;
  int k = 0;
  double h_max = 0.0;
  int field_dofs = 0;   // velocity + pressure
  int system_dofs = 0;  // + mean multiplier
  std::optional<double> u_error, p_error;
  double p_time = 0.0;
  EnergyTrace energy;
  std::vector<NewtonIteration> newton_trace;  // stationary runs
  int newton_iterations = 0;
  double constraint_residual = 0.0;
  double wall_time = 0.0;
  std::optional<FieldVec> u, p;
};

// params.nu is replaced by spec.nu; k is the pressure degree.
RunResult run_benchmark(const BenchmarkSpec& spec, const SchemeParams& params, int k, const MeshParams& mesh,
                        const RunOptions& options = {});

struct ReportRow {
  std::string scheme;
  int k = 0;
  double h_max = 0.0;
  int field_dofs = 0;
  int system_dofs = 0;
  std::optional<double> u_error, u_order, p_error, p_order;
  double wall_time = 0.0;
  bool failed = false;

  bool operator==(const ReportRow&) const = default;
};

struct ConvergenceReport {
  std::vector<ReportRow> rows;
  std::map<std::string, std::string> metadata;
  bool all_solved() const;
};

// Fills the order columns: log(e1/e2)/log(h1/h2) between consecutive rows of equal k.
void compute_orders(std::vector<ReportRow>& rows);

using CellCallback = std::function<void(const RunResult&, const MeshParams&)>;

// Failing cells are recorded as failed and the study continues.
ConvergenceReport convergence_study(const BenchmarkSpec& spec, const SchemeParams& params,
                                    const std::vector<MeshParams>& meshes, const std::vector<int>& ks,
                                    const RunOptions& options = {}, const CellCallback& on_cell = {});

void write_report_csv(std::ostream& out, const ConvergenceReport& report);
ConvergenceReport parse_report_csv(std::istream& in);

struct GammaSweepRow {
  double gamma = 0.0;
  double u_error = 0.0;
};

struct GammaSweep {
  std::vector<GammaSweepRow> rows;
  bool strictly_decreasing = false;
  double relative_variation = 0.0;  // (max - min) / min
};

// Sweeps gamma (or gamma_gd when grad_div is set) on one mesh.
GammaSweep gamma_sweep(const BenchmarkSpec& spec, SchemeParams params, int k, const MeshParams& mesh,
                       const std::vector<double>& gammas, bool grad_div = false, const RunOptions& options = {});

// Velocity at a physical point (first element containing it).
Vec2 eval_velocity_at(const FieldVec& u, const Vec2& x);

// Cavity centerlines: u along x = 0.5 and v along y = 0.5.
void write_centerlines(const std::filesystem::path& dir, const FieldVec& u, int samples = 129);

}  // namespace nsdg
