#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <vector>

#include "nsdg/types.hpp"

namespace nsdg {

struct LinearSystem {
  SparseOperator A;
  Vector b;
};

// Direct sparse LU. The symbolic analysis is kept while the matrix dimensions and nonzero count are unchanged.
class SparseLU {
 public:
  SparseLU();
  ~SparseLU();
  SparseLU(const SparseLU&) = delete;
  SparseLU& operator=(const SparseLU&) = delete;

  void factorize(const SparseOperator& A);
  Vector solve(const Vector& b) const;
  void reset();
  // Fill-reducing column preorder: column k of the factorization is column_order[k].
  // A hint only; the Eigen fallback computes its own ordering.
  void set_ordering(std::vector<int> column_order);
  static const char* backend();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class SingularSystem : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Vector solve_linear(const LinearSystem& system);

struct NewtonConfig {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  int max_iterations = 25;
  int max_halvings = 8;  // 0 disables damping
};

struct NewtonIteration {
  int iteration = 0;
  double residual_norm = 0.0;
  double step_norm = 0.0;
};

struct NewtonResult {
  Vector x;
  std::vector<NewtonIteration> trace;
  bool converged = false;
  int iterations() const { return trace.empty() ? 0 : trace.back().iteration; }
};

class NonConvergence : public std::runtime_error {
 public:
  NonConvergence(const std::string& what, std::vector<NewtonIteration> trace)
      : std::runtime_error(what), trace(std::move(trace)) {}
  std::vector<NewtonIteration> trace;
};

using ResidualFn = std::function<Vector(const Vector&)>;
// Returns the Jacobian at x; the reference must stay valid until the next call.
using JacobianFn = std::function<const SparseOperator&(const Vector&)>;

// Throws NonConvergence (carrying the trace) when max_iterations is exceeded.
NewtonResult newton_solve(const ResidualFn& residual, const JacobianFn& jacobian, const Vector& x0,
                          const NewtonConfig& config, SparseLU* lu = nullptr);

// Appends one multiplier: row/column w coupling the pressure block at pressure_offset.
// [A  0; 0 0] -> [A  w_col; w_row^T 0] with w placed in the pressure rows and columns.
LinearSystem augment_mean_constraint(const LinearSystem& system, int pressure_offset, const Vector& w);

void write_newton_trace_csv(std::ostream& out, const std::vector<NewtonIteration>& trace);

}  // namespace nsdg
