#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nsdg/forms.hpp"
#include "nsdg/solver.hpp"

namespace nsdg {

struct ButcherTableau {
  int m = 1;
  Matrix A;
  Vector b, c;

  // max_ij |b_i b_j - b_i a_ij - b_j a_ji|
  double algebraic_stability_residual() const;
};

ButcherTableau glrk_tableau(int m);

enum class Integrator { CN, GLRK1, GLRK2, BDF2 };
std::string to_string(Integrator i);
Integrator parse_integrator(const std::string& s);

struct TimeLoopConfig {
  double tau = 0.01;
  double T = 1.0;
  Integrator integrator = Integrator::CN;
  void validate() const;
  int steps() const;
};

struct EnergySample {
  int step = 0;
  double t = 0.0;
  double energy = 0.0;
};
using EnergyTrace = std::vector<EnergySample>;
void write_energy_csv(std::ostream& out, const EnergyTrace& trace);

struct StepResult {
  Vector u;                    // u^{n+1}
  std::vector<Vector> p;       // stage pressures (CN/GLRK1: midpoint; BDF2: end of step)
  std::vector<Vector> stages;  // GLRK stage velocities
  double multiplier = 0.0;
  std::vector<NewtonIteration> trace;
};

struct SteadyResult {
  Vector u, p;
  double multiplier = 0.0;
  std::vector<NewtonIteration> trace;
  std::vector<double> continuation;  // viscosities visited
  double constraint_residual = 0.0;  // |B u + f_b + w lambda|
};

class StepFailure : public std::runtime_error {
 public:
  StepFailure(const std::string& what, std::vector<NewtonIteration> trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  std::vector<NewtonIteration> trace;
};

// Implicit steppers on the semi-discrete system M u' + N_h(u) - B^T p = f, B u + f_b = 0, mean(p) = 0.
class TimeStepper {
 public:
  TimeStepper(const Forms& forms, SourceFunction f, BoundaryData g, NewtonConfig newton);
  ~TimeStepper();

  const Forms& forms() const { return forms_; }
  const NewtonConfig& newton() const { return newton_; }
  void set_newton(const NewtonConfig& c) { newton_ = c; }
  // Disables the convective term (Stokes / heat-like runs).
  void set_convection(bool on) { convection_ = on; }

  StepResult glrk_step(const Vector& un, double tn, double tau, const ButcherTableau& tab);
  StepResult cn_step(const Vector& un, double tn, double tau);
  StepResult bdf2_step(const Vector& un, const Vector& unm1, double tn, double tau);
  // Continuation in nu (factors 8, 4, 2, 1) is used when the direct solve fails.
  SteadyResult steady_solve(double t = 0.0, const std::optional<Vector>& u_guess = std::nullopt);

  double energy(const Vector& u) const { return forms_.energy(u); }

  // Stacked residual/Jacobian of the single-stage system (exposed for verification).
  struct OneStage;
  Vector steady_residual(const Vector& x, double t);
  const SparseOperator& steady_jacobian(const Vector& x, double t);

 private:
  StepResult one_stage(const OneStage& st, const Vector& x0);
  SparseOperator& one_stage_pattern();
  SparseOperator& stage_pattern(int m);

  const Forms& forms_;
  SourceFunction f_;
  BoundaryData g_;
  NewtonConfig newton_;
  bool convection_ = true;
  double nu_;
  SparseOperator K_;  // nu A + D
  std::vector<char> mask_;
  std::optional<SparseOperator> pattern1_;
  std::optional<SparseOperator> patternm_;
  int pattern_m_ = 0;
  std::optional<SparseOperator> vv_;
  SparseLU lu1_, lum_;
  std::optional<Vector> last_p_;
  std::unique_ptr<OneStage> steady_;
};

struct TimeLoopResult {
  Vector u;
  Vector p;          // last reported pressure (CN/GLRK1 midpoint, BDF2 end, GLRK2 last stage)
  double p_time = 0;  // time the pressure approximates
  EnergyTrace energy;
  int newton_iterations = 0;
  int max_newton_iterations = 0;
};

TimeLoopResult integrate(TimeStepper& stepper, const Vector& u0, const TimeLoopConfig& cfg);

}  // namespace nsdg
