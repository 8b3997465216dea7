#include "nsdg/solver.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#ifdef NSDG_HAVE_UMFPACK
#include <umfpack.h>
#else
#include <Eigen/SparseLU>
#endif

namespace nsdg {

#ifdef NSDG_HAVE_UMFPACK

struct SparseLU::Impl {
  void* symbolic = nullptr;
  void* numeric = nullptr;
  double control[UMFPACK_CONTROL];
  double info[UMFPACK_INFO];
  Eigen::Index rows = -1, nnz = -1;
  const SparseOperator* A = nullptr;

  std::vector<int> order;

  Impl() {
    umfpack_di_defaults(control);
  }
  ~Impl() { clear(); }
  void clear() {
    if (numeric) umfpack_di_free_numeric(&numeric);
    if (symbolic) umfpack_di_free_symbolic(&symbolic);
    numeric = symbolic = nullptr;
    rows = nnz = -1;
  }
};

SparseLU::SparseLU() : impl_(std::make_unique<Impl>()) {}
SparseLU::~SparseLU() = default;
void SparseLU::reset() { impl_->clear(); }
void SparseLU::set_ordering(std::vector<int> column_order) {
  impl_->clear();
  impl_->order = std::move(column_order);
}
const char* SparseLU::backend() { return "umfpack"; }

void SparseLU::factorize(const SparseOperator& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("SparseLU: matrix must be square");
  if (!A.isCompressed()) throw std::invalid_argument("SparseLU: matrix must be compressed");
  auto& I = *impl_;
  const int n = static_cast<int>(A.rows());
  if (I.rows != A.rows() || I.nnz != A.nonZeros()) {
    I.clear();
    const bool hint = static_cast<int>(I.order.size()) == n;
    I.control[UMFPACK_STRATEGY] = hint ? UMFPACK_STRATEGY_SYMMETRIC : UMFPACK_STRATEGY_AUTO;
    I.control[UMFPACK_SYM_PIVOT_TOLERANCE] = hint ? 1e-4 : 1e-3;
    const int st = hint ? umfpack_di_qsymbolic(n, n, A.outerIndexPtr(), A.innerIndexPtr(), A.valuePtr(),
                                               I.order.data(), &I.symbolic, I.control, I.info)
                        : umfpack_di_symbolic(n, n, A.outerIndexPtr(), A.innerIndexPtr(), A.valuePtr(), &I.symbolic,
                                              I.control, I.info);
    if (st != UMFPACK_OK) throw SingularSystem("SparseLU: symbolic analysis failed, status " + std::to_string(st));
    I.rows = A.rows();
    I.nnz = A.nonZeros();
  }
  if (I.numeric) umfpack_di_free_numeric(&I.numeric);
  const int st = umfpack_di_numeric(A.outerIndexPtr(), A.innerIndexPtr(), A.valuePtr(), I.symbolic, &I.numeric,
                                    I.control, I.info);
  if (st != UMFPACK_OK) {
    std::ostringstream os;
    os << "SparseLU: numeric factorization failed (status " << st << ", rcond " << I.info[UMFPACK_RCOND]
       << ", n " << n << ")";
    if (I.numeric) umfpack_di_free_numeric(&I.numeric);
    throw SingularSystem(os.str());
  }
  I.A = &A;
}

Vector SparseLU::solve(const Vector& b) const {
  auto& I = *impl_;
  if (!I.numeric || !I.A) throw std::logic_error("SparseLU: solve before factorize");
  Vector x(b.size());
  const int st = umfpack_di_solve(UMFPACK_A, I.A->outerIndexPtr(), I.A->innerIndexPtr(), I.A->valuePtr(), x.data(),
                                  b.data(), I.numeric, I.control, I.info);
  if (st != UMFPACK_OK) throw SingularSystem("SparseLU: solve failed, status " + std::to_string(st));
  return x;
}

#else

struct SparseLU::Impl {
  Eigen::SparseLU<SparseOperator, Eigen::COLAMDOrdering<int>> lu;
  Eigen::Index rows = -1, nnz = -1;
};

SparseLU::SparseLU() : impl_(std::make_unique<Impl>()) {}
SparseLU::~SparseLU() = default;
void SparseLU::reset() { impl_ = std::make_unique<Impl>(); }
void SparseLU::set_ordering(std::vector<int>) { reset(); }
const char* SparseLU::backend() { return "eigen-sparselu"; }

void SparseLU::factorize(const SparseOperator& A) {
  auto& I = *impl_;
  if (I.rows != A.rows() || I.nnz != A.nonZeros()) {
    I.lu.analyzePattern(A);
    I.rows = A.rows();
    I.nnz = A.nonZeros();
  }
  I.lu.factorize(A);
  if (I.lu.info() != Eigen::Success) throw SingularSystem("SparseLU: factorization failed: " + I.lu.lastErrorMessage());
}

Vector SparseLU::solve(const Vector& b) const { return impl_->lu.solve(b); }

#endif

Vector solve_linear(const LinearSystem& system) {
  SparseOperator A = system.A;
  A.makeCompressed();
  SparseLU lu;
  lu.factorize(A);
  Vector x = lu.solve(system.b);
  const double res = (A * x - system.b).norm();
  // One refinement step if needed.
  const double anorm = (A.cwiseAbs() * Vector::Ones(A.cols())).maxCoeff();
  if (res > 1e-10 * (anorm * x.norm() + system.b.norm())) x += lu.solve(system.b - A * x);
  const double res2 = (A * x - system.b).norm();
  if (!std::isfinite(res2) || res2 > 1e-10 * (anorm * x.norm() + system.b.norm()))
    throw SingularSystem("solve_linear: residual check failed (" + std::to_string(res2) + ")");
  return x;
}

NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& x0,
                          const NewtonConfig& config, SparseLU* lu) {
  if (!(config.abs_tol > 0) || !(config.rel_tol > 0) || config.max_iterations < 1)
    throw std::invalid_argument("NewtonConfig: invalid tolerances or iteration count");
  SparseLU local;
  SparseLU& solver = lu ? *lu : local;
  NewtonResult res;
  res.x = x0;
  Vector r = residual(res.x);
  double rn = r.norm();
  const double r0 = rn;
  res.trace.push_back({0, rn, 0.0});
  auto done = [&](double v) { return v <= config.abs_tol || v <= config.rel_tol * r0; };
  if (!std::isfinite(rn)) throw NonConvergence("newton_solve: non-finite initial residual", res.trace);
  for (int it = 1; it <= config.max_iterations && !done(rn); ++it) {
    solver.factorize(jacobian(res.x));
    const Vector dx = solver.solve(-r);
    double alpha = 1.0;
    Vector xt = res.x + dx;
    Vector rt = residual(xt);
    double rtn = rt.norm();
    for (int h = 0; h < config.max_halvings && !(rtn < rn) && !done(rtn); ++h) {
      alpha *= 0.5;
      xt = res.x + alpha * dx;
      rt = residual(xt);
      rtn = rt.norm();
    }
    res.x = std::move(xt);
    r = std::move(rt);
    rn = rtn;
    res.trace.push_back({it, rn, alpha * dx.norm()});
    if (!std::isfinite(rn)) break;
  }
  res.converged = done(rn);
  if (!res.converged) {
    std::ostringstream os;
    os << "newton_solve: no convergence after " << res.trace.back().iteration << " iterations, residual " << rn;
    throw NonConvergence(os.str(), res.trace);
  }
  return res;
}

LinearSystem augment_mean_constraint(const LinearSystem& system, int pressure_offset, const Vector& w) {
  const auto n = system.A.rows();
  if (system.A.cols() != n) throw std::invalid_argument("augment_mean_constraint: square system expected");
  if (pressure_offset < 0 || pressure_offset + w.size() > n)
    throw std::invalid_argument("augment_mean_constraint: pressure block out of range");
  std::vector<Triplet> t;
  t.reserve(system.A.nonZeros() + 2 * w.size());
  for (int j = 0; j < system.A.outerSize(); ++j)
    for (SparseOperator::InnerIterator it(system.A, j); it; ++it) t.emplace_back(it.row(), j, it.value());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    if (w(i) == 0.0) continue;
    t.emplace_back(pressure_offset + i, n, w(i));
    t.emplace_back(n, pressure_offset + i, w(i));
  }
  LinearSystem out;
  out.A.resize(n + 1, n + 1);
  out.A.setFromTriplets(t.begin(), t.end());
  out.A.makeCompressed();
  out.b = Vector::Zero(n + 1);
  out.b.head(n) = system.b;
  return out;
}

void write_newton_trace_csv(std::ostream& out, const std::vector<NewtonIteration>& trace) {
  out << "iteration,residual norm,step norm\n";
  out.precision(10);
  for (const auto& it : trace) out << it.iteration << ',' << it.residual_norm << ',' << it.step_norm << '\n';
}

}  // namespace nsdg
