#include "nsdg/timeint.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

namespace nsdg {

double ButcherTableau::algebraic_stability_residual() const {
  double r = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) r = std::max(r, std::abs(b(i) * b(j) - b(i) * A(i, j) - b(j) * A(j, i)));
  return r;
}

ButcherTableau glrk_tableau(int m) {
  ButcherTableau t;
  t.m = m;
  if (m == 1) {
    t.A = Matrix::Constant(1, 1, 0.5);
    t.b = Vector::Constant(1, 1.0);
    t.c = Vector::Constant(1, 0.5);
    return t;
  }
  if (m == 2) {
    const double s = std::sqrt(3.0) / 6.0;
    t.A.resize(2, 2);
    t.A << 0.25, 0.25 - s, 0.25 + s, 0.25;
    t.b = Vector::Constant(2, 0.5);
    t.c.resize(2);
    t.c << 0.5 - s, 0.5 + s;
    return t;
  }
  throw std::invalid_argument("glrk_tableau: only m = 1 or 2 are supported");
}

std::string to_string(Integrator i) {
  switch (i) {
    case Integrator::CN: return "cn";
    case Integrator::GLRK1: return "glrk1";
    case Integrator::GLRK2: return "glrk2";
    case Integrator::BDF2: return "bdf2";
  }
  return "?";
}

Integrator parse_integrator(const std::string& s) {
  if (s == "cn") return Integrator::CN;
  if (s == "glrk1") return Integrator::GLRK1;
  if (s == "glrk2") return Integrator::GLRK2;
  if (s == "bdf2") return Integrator::BDF2;
  throw std::invalid_argument("unknown integrator '" + s + "' (valid: cn, glrk1, glrk2, bdf2)");
}

void TimeLoopConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("TimeLoopConfig: tau must be positive");
  if (!(T >= tau * (1 - 1e-12))) throw std::invalid_argument("TimeLoopConfig: T must be >= tau");
}

int TimeLoopConfig::steps() const { return static_cast<int>(std::lround(T / tau)); }

void write_energy_csv(std::ostream& out, const EnergyTrace& trace) {
  out << "step,t,energy\n";
  out.precision(16);
  for (const auto& s : trace) out << s.step << ',' << s.t << ',' << s.energy << '\n';
}

// ---------------------------------------------------------------------------------------------

struct TimeStepper::OneStage {
  double mass_coef = 0.0;
  Vector mass_rhs;
  double theta = 1.0;
  Vector uold;
  Vector F, fb;
  Vector gvals;
};

TimeStepper::TimeStepper(const Forms& forms, SourceFunction f, BoundaryData g, NewtonConfig newton)
    : forms_(forms), f_(std::move(f)), g_(std::move(g)), newton_(newton), nu_(forms.params().nu) {
  if (!forms_.pressure()) throw std::invalid_argument("TimeStepper: pressure space required");
  K_ = nu_ * forms_.viscous() + forms_.penalty();
  K_.makeCompressed();
}

TimeStepper::~TimeStepper() = default;

namespace {

struct Layout {
  int nv, nq, S;
};

void set_multiplier_entries(SparseOperator& S, const Vector& w, int off, int nv, int nq) {
  for (int i = 0; i < nq; ++i)
    if (w(i) != 0.0) {
      pattern_entry(S, off + nv + i, off + nv + nq) = w(i);
      pattern_entry(S, off + nv + nq, off + nv + i) = w(i);
    }
}

void add_multiplier_pattern(PatternBuilder& pb, const Vector& w, int off, int nv, int nq) {
  for (int i = 0; i < nq; ++i)
    if (w(i) != 0.0) {
      pb.add(off + nv + i, off + nv + nq);
      pb.add(off + nv + nq, off + nv + i);
    }
}

void zero_values(SparseOperator& S) { std::fill(S.valuePtr(), S.valuePtr() + S.nonZeros(), 0.0); }

}  // namespace

SparseOperator& TimeStepper::one_stage_pattern() {
  if (!pattern1_) {
    const int nv = forms_.nv(), nq = forms_.nq(), N = nv + nq + 1;
    const bool dg = forms_.params().is_dg();
    PatternBuilder pb(N, N);
    pb.add_space_block(*forms_.velocity(), 0, *forms_.velocity(), 0, dg);
    pb.add_pattern(forms_.divergence(), nv, 0);
    pb.add_pattern(forms_.divergence(), 0, nv, true);
    add_multiplier_pattern(pb, forms_.mean_weights(), 0, nv, nq);
    pattern1_ = pb.build();
    lu1_.set_ordering(element_block_ordering(*forms_.velocity(), *forms_.pressure(), 1, N));
    mask_.assign(N, 0);
    for (int d : forms_.dirichlet_dofs()) mask_[d] = 1;
  }
  return *pattern1_;
}

SparseOperator& TimeStepper::stage_pattern(int m) {
  if (!patternm_ || pattern_m_ != m) {
    const int nv = forms_.nv(), nq = forms_.nq(), S = nv + nq + 1;
    const bool dg = forms_.params().is_dg();
    PatternBuilder pb(m * S, m * S);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        pb.add_space_block(*forms_.velocity(), i * S, *forms_.velocity(), j * S, dg);
        pb.add_pattern(forms_.divergence(), i * S, j * S + nv, true);
      }
      pb.add_pattern(forms_.divergence(), i * S + nv, i * S);
      add_multiplier_pattern(pb, forms_.mean_weights(), i * S, nv, nq);
    }
    patternm_ = pb.build();
    pattern_m_ = m;
    lum_.set_ordering(element_block_ordering(*forms_.velocity(), *forms_.pressure(), m, S));
    PatternBuilder vb(nv, nv);
    vb.add_space_block(*forms_.velocity(), 0, *forms_.velocity(), 0, dg);
    vv_ = vb.build();
  }
  return *patternm_;
}

StepResult TimeStepper::one_stage(const OneStage& st, const Vector& x0) {
  const int nv = forms_.nv(), nq = forms_.nq();
  const auto& M = forms_.mass();
  const auto& B = forms_.divergence();
  const auto& w = forms_.mean_weights();
  const auto& dd = forms_.dirichlet_dofs();
  SparseOperator& J = one_stage_pattern();

  auto residual = [&](const Vector& x) {
    const Vector u = x.head(nv), p = x.segment(nv, nq);
    const double lam = x(nv + nq);
    const Vector ub = st.theta * u + (1.0 - st.theta) * st.uold;
    Vector r(nv + nq + 1);
    Vector ru = K_ * ub - B.transpose() * p - st.F;
    if (st.mass_coef != 0.0) ru += st.mass_coef * (M * u) - st.mass_rhs;
    if (convection_) ru += forms_.convective_residual(ub);
    for (std::size_t i = 0; i < dd.size(); ++i) ru(dd[i]) = u(dd[i]) - st.gvals(i);
    r.head(nv) = ru;
    r.segment(nv, nq) = B * ub + st.fb + lam * w;
    r(nv + nq) = w.dot(p);
    return r;
  };
  auto jacobian = [&](const Vector& x) -> const SparseOperator& {
    const Vector ub = st.theta * x.head(nv) + (1.0 - st.theta) * st.uold;
    zero_values(J);
    if (st.mass_coef != 0.0) add_into(J, M, 0, 0, st.mass_coef, false, &mask_);
    add_into(J, K_, 0, 0, st.theta, false, &mask_);
    if (convection_) {
      PatternSink sink(J, 0, 0, st.theta, &mask_);
      forms_.assemble_convective(ub, sink, true, true);
    }
    add_into(J, B, 0, nv, -1.0, true, &mask_);
    add_into(J, B, nv, 0, st.theta);
    set_multiplier_entries(J, w, 0, nv, nq);
    for (int d : dd) pattern_entry(J, d, d) = 1.0;
    return J;
  };
  NewtonResult nr;
  try {
    nr = newton_solve(residual, jacobian, x0, newton_, &lu1_);
  } catch (const NonConvergence& e) {
    throw StepFailure(e.what(), e.trace);
  }
  StepResult out;
  out.u = nr.x.head(nv);
  out.p = {nr.x.segment(nv, nq)};
  out.multiplier = nr.x(nv + nq);
  out.trace = std::move(nr.trace);
  last_p_ = out.p.front();
  return out;
}

namespace {

Vector initial_guess(const Vector& u, const std::optional<Vector>& p, int nq) {
  Vector x = Vector::Zero(u.size() + nq + 1);
  x.head(u.size()) = u;
  if (p && p->size() == nq) x.segment(u.size(), nq) = *p;
  return x;
}

}  // namespace

StepResult TimeStepper::cn_step(const Vector& un, double tn, double tau) {
  OneStage st;
  st.mass_coef = 1.0 / tau;
  st.mass_rhs = forms_.mass() * un / tau;
  st.theta = 0.5;
  st.uold = un;
  std::tie(st.F, st.fb) = forms_.loads(f_, g_, tn + 0.5 * tau);
  if (!forms_.dirichlet_dofs().empty()) st.gvals = forms_.dirichlet_values(g_, tn + tau);
  return one_stage(st, initial_guess(un, last_p_, forms_.nq()));
}

StepResult TimeStepper::bdf2_step(const Vector& un, const Vector& unm1, double tn, double tau) {
  OneStage st;
  st.mass_coef = 1.5 / tau;
  st.mass_rhs = forms_.mass() * (4.0 * un - unm1) / (2.0 * tau);
  st.theta = 1.0;
  st.uold = un;
  std::tie(st.F, st.fb) = forms_.loads(f_, g_, tn + tau);
  if (!forms_.dirichlet_dofs().empty()) st.gvals = forms_.dirichlet_values(g_, tn + tau);
  return one_stage(st, initial_guess(un, last_p_, forms_.nq()));
}

Vector TimeStepper::steady_residual(const Vector& x, double t) {
  const int nv = forms_.nv(), nq = forms_.nq();
  Vector r = residual(forms_, x.head(nv), x.segment(nv, nq), x(nv + nq), f_, g_, t);
  if (!convection_) r.head(nv) -= forms_.convective_residual(x.head(nv));
  return r;
}

const SparseOperator& TimeStepper::steady_jacobian(const Vector& x, double) {
  const int nv = forms_.nv(), nq = forms_.nq();
  SparseOperator& J = one_stage_pattern();
  zero_values(J);
  add_into(J, K_, 0, 0, 1.0, false, &mask_);
  if (convection_) {
    PatternSink sink(J, 0, 0, 1.0, &mask_);
    forms_.assemble_convective(x.head(nv), sink, true, true);
  }
  add_into(J, forms_.divergence(), 0, nv, -1.0, true, &mask_);
  add_into(J, forms_.divergence(), nv, 0, 1.0);
  set_multiplier_entries(J, forms_.mean_weights(), 0, nv, nq);
  for (int d : forms_.dirichlet_dofs()) pattern_entry(J, d, d) = 1.0;
  return J;
}

SteadyResult TimeStepper::steady_solve(double t, const std::optional<Vector>& u_guess) {
  const int nv = forms_.nv(), nq = forms_.nq();
  OneStage st;
  st.theta = 1.0;
  st.uold = Vector::Zero(nv);
  const auto base_loads = [&](double nu) {
    // Liftings scale with nu through f_a only.
    const BoundaryLoad L = forms_.params().is_dg() ? forms_.boundary_load(g_, t) : BoundaryLoad{};
    Vector F = forms_.source_load(f_, t);
    Vector fb = Vector::Zero(nq);
    if (forms_.params().is_dg()) {
      F += nu * L.fa + L.fd;
      if (forms_.params().scheme == Scheme::DgN) F += L.fc;
      fb = L.fb;
    }
    return std::pair{F, fb};
  };
  if (!forms_.dirichlet_dofs().empty()) st.gvals = forms_.dirichlet_values(g_, t);
  Vector x0 = initial_guess(u_guess ? *u_guess : Vector::Zero(nv), std::nullopt, nq);

  SteadyResult res;
  auto attempt = [&](double nu, const Vector& x) {
    K_ = nu * forms_.viscous() + forms_.penalty();
    K_.makeCompressed();
    std::tie(st.F, st.fb) = base_loads(nu);
    res.continuation.push_back(nu);
    return one_stage(st, x);
  };
  StepResult sr;
  try {
    sr = attempt(nu_, x0);
  } catch (const StepFailure& e) {
    res.trace = e.trace;
    Vector x = x0;
    try {
      for (double factor : {8.0, 4.0, 2.0, 1.0}) {
        sr = attempt(nu_ * factor, x);
        x.head(nv) = sr.u;
        x.segment(nv, nq) = sr.p.front();
        res.trace.insert(res.trace.end(), sr.trace.begin(), sr.trace.end());
      }
    } catch (const StepFailure& e2) {
      K_ = nu_ * forms_.viscous() + forms_.penalty();
      auto tr = res.trace;
      tr.insert(tr.end(), e2.trace.begin(), e2.trace.end());
      throw StepFailure(std::string("steady_solve: continuation failed: ") + e2.what(), tr);
    }
  }
  if (res.continuation.size() == 1) res.trace = sr.trace;
  K_ = nu_ * forms_.viscous() + forms_.penalty();
  K_.makeCompressed();
  res.u = sr.u;
  res.p = sr.p.front();
  res.multiplier = sr.multiplier;
  res.constraint_residual = (forms_.divergence() * res.u + st.fb + res.multiplier * forms_.mean_weights()).norm();
  return res;
}

StepResult TimeStepper::glrk_step(const Vector& un, double tn, double tau, const ButcherTableau& tab) {
  const int m = tab.m;
  const int nv = forms_.nv(), nq = forms_.nq(), S = nv + nq + 1, N = m * S;
  const auto& M = forms_.mass();
  const auto& B = forms_.divergence();
  const auto& w = forms_.mean_weights();
  const auto& dd = forms_.dirichlet_dofs();
  SparseOperator& J = stage_pattern(m);
  SparseOperator& vv = *vv_;
  std::vector<char> mask(N, 0);
  for (int i = 0; i < m; ++i)
    for (int d : dd) mask[i * S + d] = 1;

  std::vector<Vector> F(m), fb(m), gv(m);
  for (int i = 0; i < m; ++i) {
    std::tie(F[i], fb[i]) = forms_.loads(f_, g_, tn + tab.c(i) * tau);
    if (!dd.empty()) gv[i] = forms_.dirichlet_values(g_, tn + tab.c(i) * tau);
  }

  auto residual = [&](const Vector& x) {
    std::vector<Vector> Nj(m);
    for (int j = 0; j < m; ++j) {
      const Vector U = x.segment(j * S, nv);
      Nj[j] = K_ * U - B.transpose() * x.segment(j * S + nv, nq) - F[j];
      if (convection_) Nj[j] += forms_.convective_residual(U);
    }
    Vector r(N);
    for (int i = 0; i < m; ++i) {
      const Vector U = x.segment(i * S, nv);
      Vector ru = M * (U - un) / tau;
      for (int j = 0; j < m; ++j) ru += tab.A(i, j) * Nj[j];
      for (std::size_t k = 0; k < dd.size(); ++k) ru(dd[k]) = U(dd[k]) - gv[i](k);
      r.segment(i * S, nv) = ru;
      r.segment(i * S + nv, nq) = B * U + fb[i] + x(i * S + nv + nq) * w;
      r(i * S + nv + nq) = w.dot(x.segment(i * S + nv, nq));
    }
    return r;
  };
  auto jacobian = [&](const Vector& x) -> const SparseOperator& {
    zero_values(J);
    for (int i = 0; i < m; ++i) add_into(J, M, i * S, i * S, 1.0 / tau, false, &mask);
    for (int j = 0; j < m; ++j) {
      if (convection_) {
        zero_values(vv);
        PatternSink sink(vv, 0, 0, 1.0);
        forms_.assemble_convective(x.segment(j * S, nv), sink, true, true);
      }
      for (int i = 0; i < m; ++i) {
        const double a = tab.A(i, j);
        add_into(J, K_, i * S, j * S, a, false, &mask);
        if (convection_) add_into(J, vv, i * S, j * S, a, false, &mask);
        add_into(J, B, i * S, j * S + nv, -a, true, &mask);
      }
    }
    for (int i = 0; i < m; ++i) {
      add_into(J, B, i * S + nv, i * S, 1.0);
      set_multiplier_entries(J, w, i * S, nv, nq);
      for (int d : dd) pattern_entry(J, i * S + d, i * S + d) = 1.0;
    }
    return J;
  };

  Vector x0 = Vector::Zero(N);
  for (int i = 0; i < m; ++i) {
    x0.segment(i * S, nv) = un;
    if (last_p_ && last_p_->size() == nq) x0.segment(i * S + nv, nq) = *last_p_;
  }
  NewtonResult nr;
  try {
    nr = newton_solve(residual, jacobian, x0, newton_, &lum_);
  } catch (const NonConvergence& e) {
    throw StepFailure(e.what(), e.trace);
  }
  StepResult out;
  const Matrix Ainv = tab.A.inverse();
  const Vector coef = Ainv.transpose() * tab.b;  // u^{n+1} = u^n + sum_j coef_j (U^j - u^n)
  out.u = un;
  for (int j = 0; j < m; ++j) {
    out.stages.push_back(nr.x.segment(j * S, nv));
    out.p.push_back(nr.x.segment(j * S + nv, nq));
    out.u += coef(j) * (out.stages.back() - un);
  }
  if (!dd.empty()) {
    const Vector gend = forms_.dirichlet_values(g_, tn + tau);
    for (std::size_t k = 0; k < dd.size(); ++k) out.u(dd[k]) = gend(k);
  }
  out.trace = std::move(nr.trace);
  last_p_ = out.p.back();
  return out;
}

TimeLoopResult integrate(TimeStepper& stepper, const Vector& u0, const TimeLoopConfig& cfg) {
  cfg.validate();
  const int steps = cfg.steps();
  TimeLoopResult res;
  res.u = u0;
  res.energy.push_back({0, 0.0, stepper.energy(u0)});
  std::optional<ButcherTableau> tab;
  if (cfg.integrator == Integrator::GLRK1) tab = glrk_tableau(1);
  if (cfg.integrator == Integrator::GLRK2) tab = glrk_tableau(2);
  Vector uprev;
  for (int n = 0; n < steps; ++n) {
    const double tn = n * cfg.tau;
    StepResult sr;
    switch (cfg.integrator) {
      case Integrator::CN:
        sr = stepper.cn_step(res.u, tn, cfg.tau);
        res.p_time = tn + 0.5 * cfg.tau;
        break;
      case Integrator::GLRK1:
      case Integrator::GLRK2:
        sr = stepper.glrk_step(res.u, tn, cfg.tau, *tab);
        res.p_time = tn + tab->c(tab->m - 1) * cfg.tau;
        break;
      case Integrator::BDF2:
        if (n == 0) {
          sr = stepper.cn_step(res.u, tn, cfg.tau);
          res.p_time = tn + 0.5 * cfg.tau;
        } else {
          sr = stepper.bdf2_step(res.u, uprev, tn, cfg.tau);
          res.p_time = tn + cfg.tau;
        }
        break;
    }
    uprev = res.u;
    res.u = sr.u;
    res.p = sr.p.back();
    const int its = sr.trace.empty() ? 0 : sr.trace.back().iteration;
    res.newton_iterations += its;
    res.max_newton_iterations = std::max(res.max_newton_iterations, its);
    res.energy.push_back({n + 1, (n + 1) * cfg.tau, stepper.energy(res.u)});
  }
  return res;
}

}  // namespace nsdg
