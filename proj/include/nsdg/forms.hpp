#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>

#include "nsdg/assembly.hpp"
#include "nsdg/space.hpp"

namespace nsdg {

enum class Scheme { DgN, DgC, H1 };
enum class StressTensor { Grad, SymGrad, Deviatoric };

std::string to_string(Scheme s);
std::string to_string(StressTensor t);
Scheme parse_scheme(const std::string& s);
StressTensor parse_tensor(const std::string& s);

struct SchemeParams {
  Scheme scheme = Scheme::DgN;
  StressTensor tensor = StressTensor::Deviatoric;
  double nu = 1.0;
  std::optional<double> eta;    // DG only; default 3(k+1)(k+2), k the pressure degree
  std::optional<double> zeta;   // DG only; default 0.5
  std::optional<double> gamma;  // DG only; default 0
  double gamma_gd = 0.0;
  int volume_quadrature = -1;  // -1: 3(k+1)
  int edge_quadrature = -1;    // -1: 3(k+1)+1

  void validate() const;
  bool is_dg() const { return scheme != Scheme::H1; }
  double eta_for(int k) const { return eta.value_or(3.0 * (k + 1) * (k + 2)); }
  double zeta_value() const { return zeta.value_or(0.5); }
  double gamma_value() const { return gamma.value_or(0.0); }
  // Tensor actually used by the viscous form (DG-C is always GRAD).
  StressTensor effective_tensor() const { return scheme == Scheme::DgC ? StressTensor::Grad : tensor; }
};

// Dirichlet data g(t, x, tag); an empty function means g = 0.
struct BoundaryData {
  std::function<Vec2(double, const Vec2&, int)> g;

  bool zero() const { return !g; }
  Vec2 operator()(double t, const Vec2& x, int tag) const { return g ? g(t, x, tag) : Vec2::Zero(); }
};

// Body force f(t, x); empty means zero.
using SourceFunction = std::function<Vec2(double, const Vec2&)>;

struct BoundaryLoad {
  Vector fa, fb, fc, fd;
};

// Velocity/pressure space pair for a scheme: DG(k+1)^2 x DG(k) or CG(k+1)^2 x CG(k).
struct SpacePair {
  SpacePtr velocity;
  SpacePtr pressure;
};
SpacePair make_spaces(std::shared_ptr<const Mesh> mesh, Scheme scheme, int k);

// Assembles every form of the scheme on a fixed pair of spaces. Constant operators are cached.
class Forms {
 public:
  Forms(SpacePtr velocity, SpacePtr pressure, SchemeParams params);
  ~Forms();
  Forms(const Forms&) = delete;
  Forms& operator=(const Forms&) = delete;

  const SchemeParams& params() const { return params_; }
  const SpacePtr& velocity() const { return V_; }
  const SpacePtr& pressure() const { return Q_; }
  int pressure_degree() const { return V_->degree() - 1; }
  int nv() const { return V_->num_dofs(); }
  int nq() const { return Q_ ? Q_->num_dofs() : 0; }

  const SparseOperator& mass() const;        // (u, v)
  const SparseOperator& viscous() const;     // a_h
  const SparseOperator& divergence() const;  // b_h, rows = pressure
  const SparseOperator& penalty() const;     // d_h
  const Vector& mean_weights() const;        // w_i = integral of pressure basis i

  void assemble_mass(BlockSink& s) const;
  void assemble_viscous(BlockSink& s) const;
  void assemble_divergence(BlockSink& s) const;
  void assemble_penalty(BlockSink& s) const;

  // c_h(beta; v, w) with beta frozen (v-slot).
  SparseOperator convective(const Vector& beta) const;
  // Linearization of u -> c_h(u; u, .) at u.
  SparseOperator convective_jacobian(const Vector& u) const;
  void assemble_convective(const Vector& u, BlockSink& s, bool v_slot, bool beta_slot) const;
  // Vector c_h(u; u, w_i).
  Vector convective_residual(const Vector& u) const;

  BoundaryLoad boundary_load(const BoundaryData& g, double t) const;
  Vector source_load(const SourceFunction& f, double t) const;
  // Momentum right-hand side f + nu f_a + f_c + f_d and constraint lifting f_b (DG); H1: f only, f_b = 0.
  std::pair<Vector, Vector> loads(const SourceFunction& f, const BoundaryData& g, double t) const;

  // Strongly constrained velocity dofs (H1 only) and their values at time t.
  const std::vector<int>& dirichlet_dofs() const { return dirichlet_; }
  Vector dirichlet_values(const BoundaryData& g, double t) const;

  double energy(const Vector& u) const { return u.dot(mass() * u); }

  struct Tables;

 private:
  SpacePtr V_, Q_;
  SchemeParams params_;
  std::unique_ptr<Tables> tab_;
  std::vector<int> dirichlet_;
  mutable std::optional<SparseOperator> mass_, viscous_, divergence_, penalty_;
  mutable std::optional<Vector> mean_;
};

SparseOperator assemble_mass(const SpacePtr& space);
SparseOperator assemble_viscous(const SpacePtr& spaceV, const SchemeParams& params);
SparseOperator assemble_bh(const SpacePtr& spaceV, const SpacePtr& spaceQ);
SparseOperator assemble_dh(const SpacePtr& spaceV, const SchemeParams& params);
SparseOperator assemble_convective(const FieldVec& beta, const SchemeParams& params);
SparseOperator convective_jacobian(const FieldVec& u, const SchemeParams& params);
BoundaryLoad assemble_boundary_load(const BoundaryData& g, double t, const SpacePtr& spaceV, const SpacePtr& spaceQ,
                                    const SchemeParams& params);

// Stationary residual [momentum; constraint; mean]:
// momentum = C(u)u + nu A u + D u - B^T p - (f + nu f_a + f_c + f_d), constraint = B u + f_b + w lambda, mean = w^T p.
Vector residual(const Forms& forms, const Vector& u, const Vector& p, double multiplier, const SourceFunction& f,
                const BoundaryData& g, double t);

// Face trace helpers: jumps and averages of scalar traces.
inline double jump(double plus, double minus) { return plus - minus; }
inline double average(double plus, double minus) { return 0.5 * (plus + minus); }

// Optional MatrixMarket coordinate dump.
void write_matrix_market(const std::string& path, const SparseOperator& m);

}  // namespace nsdg
