#include <doctest.h>

#include <random>
#include <sstream>

#include "nsdg/solver.hpp"

using namespace nsdg;

namespace {

SparseOperator sparse(const Matrix& d) {
  SparseOperator s = d.sparseView();
  s.makeCompressed();
  return s;
}

}  // namespace

TEST_CASE("solve_linear: reference systems") {
  LinearSystem id{sparse(Matrix::Identity(5, 5)), Vector::LinSpaced(5, 1, 5)};
  CHECK((solve_linear(id) - id.b).norm() == 0.0);

  Matrix a(2, 2);
  a << 2, 1, 1, 3;
  LinearSystem s{sparse(a), Vector(2)};
  s.b << 3, 5;
  const Vector x = solve_linear(s);
  CHECK(x(0) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(x(1) == doctest::Approx(1.4).epsilon(1e-14));

  std::mt19937 rng(3);
  std::normal_distribution<double> n;
  Matrix r(40, 40);
  for (auto& v : r.reshaped()) v = n(rng);
  const Matrix spd = r * r.transpose() + 40 * Matrix::Identity(40, 40);
  Vector b(40);
  for (auto& v : b) v = n(rng);
  const Vector y = solve_linear({sparse(spd), b});
  CHECK((spd * y - b).norm() <= 1e-12 * b.norm());
}

TEST_CASE("solve_linear: singular system is reported") {
  Matrix a = Matrix::Zero(3, 3);
  a(0, 0) = 1;
  a(1, 1) = 1;
  CHECK_THROWS_AS(solve_linear({sparse(a), Vector::Ones(3)}), SingularSystem);
}

TEST_CASE("SparseLU: refactorization and ordering hint") {
  Matrix a(3, 3);
  a << 4, 1, 0, 1, 4, 1, 0, 1, 4;
  SparseOperator A = sparse(a);
  SparseLU lu;
  CHECK_THROWS_AS(lu.solve(Vector::Ones(3)), std::logic_error);
  lu.set_ordering({2, 0, 1});
  lu.factorize(A);
  CHECK((A * lu.solve(Vector::Ones(3)) - Vector::Ones(3)).norm() <= 1e-14);
  for (int k = 0; k < A.nonZeros(); ++k) A.valuePtr()[k] *= 2;
  lu.factorize(A);
  CHECK((A * lu.solve(Vector::Ones(3)) - Vector::Ones(3)).norm() <= 1e-14);
}

TEST_CASE("newton_solve: linear problem converges in one iteration") {
  Matrix a(2, 2);
  a << 3, 1, 1, 2;
  const SparseOperator A = sparse(a);
  const Vector b = Vector::Ones(2);
  const auto res = newton_solve([&](const Vector& x) { return Vector(A * x - b); },
                                [&](const Vector&) -> const SparseOperator& { return A; }, Vector::Zero(2),
                                NewtonConfig{});
  CHECK(res.converged);
  CHECK(res.iterations() == 1);
  CHECK((A * res.x - b).norm() <= 1e-14);
}

TEST_CASE("newton_solve: x^2 = 4 from x0 = 3, quadratic convergence") {
  SparseOperator J(1, 1);
  J.insert(0, 0) = 1.0;
  J.makeCompressed();
  NewtonConfig cfg;
  cfg.abs_tol = 1e-14;
  cfg.rel_tol = 1e-300;
  const auto res = newton_solve([](const Vector& x) { return Vector::Constant(1, x(0) * x(0) - 4); },
                                [&](const Vector& x) -> const SparseOperator& {
                                  J.coeffRef(0, 0) = 2 * x(0);
                                  return J;
                                },
                                Vector::Constant(1, 3.0), cfg);
  CHECK(res.x(0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(res.iterations() <= 6);
  // |r_{k+1}| / |r_k|^2 bounded once in the asymptotic regime.
  for (std::size_t i = 2; i + 1 < res.trace.size(); ++i) {
    const double q = res.trace[i + 1].residual_norm / std::pow(res.trace[i].residual_norm, 2);
    CHECK(q < 1.0);
  }
}

TEST_CASE("newton_solve: nonconvergence carries the trace") {
  SparseOperator J(1, 1);
  J.insert(0, 0) = 1.0;
  J.makeCompressed();
  NewtonConfig cfg;
  cfg.max_iterations = 3;
  cfg.max_halvings = 0;
  // x^2 + 1 has no real root.
  try {
    newton_solve([](const Vector& x) { return Vector::Constant(1, x(0) * x(0) + 1); },
                 [&](const Vector& x) -> const SparseOperator& {
                   J.coeffRef(0, 0) = 2 * x(0);
                   return J;
                 },
                 Vector::Constant(1, 0.7), cfg);
    FAIL("expected NonConvergence");
  } catch (const NonConvergence& e) {
    CHECK(e.trace.size() == 4);
    CHECK(e.trace.front().iteration == 0);
    CHECK(e.trace.back().iteration == 3);
  }
  cfg.abs_tol = -1;
  CHECK_THROWS_AS(newton_solve([](const Vector& x) { return x; },
                               [&](const Vector&) -> const SparseOperator& { return J; }, Vector::Zero(1), cfg),
                  std::invalid_argument);
}

TEST_CASE("augment_mean_constraint: shape, zero multiplier, constant shift removed") {
  // Pure Neumann 1D Laplacian on pressure-like unknowns: singular with constant kernel.
  const int n = 6;
  Matrix L = Matrix::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) {
    L(i, i) += 1;
    L(i + 1, i + 1) += 1;
    L(i, i + 1) -= 1;
    L(i + 1, i) -= 1;
  }
  Vector b = Vector::LinSpaced(n, -1, 1);
  b.array() -= b.mean();
  const Vector w = Vector::Constant(n, 1.0 / n);
  const auto aug = augment_mean_constraint({sparse(L), b}, 0, w);
  CHECK(aug.A.rows() == n + 1);
  CHECK(aug.A.cols() == n + 1);
  const Vector x = solve_linear(aug);
  CHECK(std::abs(x(n)) <= 1e-12);
  CHECK(std::abs(w.dot(x.head(n))) <= 1e-13);
  CHECK((L * x.head(n) - b).norm() <= 1e-12);
  CHECK_THROWS_AS(augment_mean_constraint({sparse(L), b}, 2, w), std::invalid_argument);
}

TEST_CASE("Newton trace CSV") {
  std::ostringstream os;
  write_newton_trace_csv(os, {{0, 1.0, 0.0}, {1, 1e-3, 0.5}});
  CHECK(os.str().rfind("iteration,residual norm,step norm\n0,1,0\n1,0.001,0.5\n", 0) == 0);
}
