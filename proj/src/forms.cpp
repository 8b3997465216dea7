#include "nsdg/forms.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace nsdg {

std::string to_string(Scheme s) {
  switch (s) {
    case Scheme::DgN: return "dg-n";
    case Scheme::DgC: return "dg-c";
    case Scheme::H1: return "h1";
  }
  return "?";
}

std::string to_string(StressTensor t) {
  switch (t) {
    case StressTensor::Grad: return "grad";
    case StressTensor::SymGrad: return "symgrad";
    case StressTensor::Deviatoric: return "deviatoric";
  }
  return "?";
}

Scheme parse_scheme(const std::string& s) {
  if (s == "dg-n") return Scheme::DgN;
  if (s == "dg-c") return Scheme::DgC;
  if (s == "h1") return Scheme::H1;
  throw std::invalid_argument("unknown scheme '" + s + "' (valid: dg-n, dg-c, h1)");
}

StressTensor parse_tensor(const std::string& s) {
  if (s == "grad") return StressTensor::Grad;
  if (s == "symgrad") return StressTensor::SymGrad;
  if (s == "deviatoric") return StressTensor::Deviatoric;
  throw std::invalid_argument("unknown tensor '" + s + "' (valid: grad, symgrad, deviatoric)");
}

void SchemeParams::validate() const {
  if (!(nu > 0.0)) throw std::invalid_argument("SchemeParams: nu must be positive");
  if (gamma_gd < 0.0) throw std::invalid_argument("SchemeParams: gamma_gd must be >= 0");
  if (scheme == Scheme::H1) {
    if (eta || zeta || gamma) throw std::invalid_argument("SchemeParams: eta, zeta, gamma are DG-only parameters");
    return;
  }
  if (eta && *eta < 0.0) throw std::invalid_argument("SchemeParams: eta must be >= 0");
  if (zeta && *zeta < 0.0) throw std::invalid_argument("SchemeParams: zeta must be >= 0");
  if (gamma && *gamma < 0.0) throw std::invalid_argument("SchemeParams: gamma must be >= 0");
}

SpacePair make_spaces(std::shared_ptr<const Mesh> mesh, Scheme scheme, int k) {
  auto topo = std::make_shared<const FaceTopology>(extract_faces(*mesh));
  const SpaceKind kind = scheme == Scheme::H1 ? SpaceKind::CG : SpaceKind::DG;
  if (kind == SpaceKind::CG && k < 1) throw std::invalid_argument("make_spaces: Taylor-Hood needs k >= 1");
  return {build_space(mesh, kind, k + 1, 2, topo), build_space(mesh, kind, k, 1, topo)};
}

// ---------------------------------------------------------------------------------------------

struct Forms::Tables {
  QuadratureRule<double> vq, eq;
  Tabulation<double> Vvol, Qvol;
  std::array<std::array<Tabulation<double>, 2>, 3> Vedge, Qedge;
  std::vector<AffineMap<double>> maps;
  int nlV = 0, nlQ = 0;
};

namespace {

using Span = std::span<const int>;

Span comp(Span dofs, int c, int nl) { return dofs.subspan(static_cast<std::size_t>(c) * nl, nl); }

void physical_gradients(const Tabulation<double>& t, const AffineMap<double>& m, Matrix& dx, Matrix& dy) {
  const Mat2& G = m.inverse;
  dx = t.dx * G(0, 0) + t.dy * G(1, 0);
  dy = t.dx * G(0, 1) + t.dy * G(1, 1);
}

Points2<double> edge_points(const QuadratureRule<double>& eq, int l, bool flip) {
  static const Vec2 R[3] = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};
  Vec2 a = R[(l + 1) % 3], b = R[(l + 2) % 3];
  if (flip) std::swap(a, b);
  Points2<double> p(2, eq.size());
  for (int i = 0; i < eq.size(); ++i) p.col(i) = a + eq.points(0, i) * (b - a);
  return p;
}

// One side of a face: traces of the velocity (and pressure) basis at the face quadrature points.
struct Side {
  int elem = -1;
  double sigma = 1.0;  // jump sign
  double omega = 1.0;  // average weight
  const Matrix* phi = nullptr;
  const Matrix* qphi = nullptr;
  Matrix dx, dy;
  const Matrix& D(int d) const { return d == 0 ? dx : dy; }
};

}  // namespace

struct FaceData {
  int nsides = 1;
  Side side[2];
  Vector w;  // weights * h
  Vec2 n;
  double h = 0.0;
  std::vector<Vec2> x;
  int tag = 0;
};

namespace {

FaceData face_data(const Forms::Tables& T, const Mesh& mesh, const Face& f, bool need_grad) {
  FaceData fd;
  fd.n = f.normal;
  fd.h = f.h;
  fd.tag = f.tag;
  fd.w = T.eq.weights * f.h;
  const Vec2 A = mesh.vertices[f.vertices[0]], B = mesh.vertices[f.vertices[1]];
  fd.x.resize(T.eq.size());
  for (int i = 0; i < T.eq.size(); ++i) fd.x[i] = A + T.eq.points(0, i) * (B - A);
  fd.nsides = f.boundary() ? 1 : 2;
  for (int s = 0; s < fd.nsides; ++s) {
    Side& sd = fd.side[s];
    sd.elem = s == 0 ? f.plus : f.minus;
    const int l = s == 0 ? f.local_plus : f.local_minus;
    const auto& tri = mesh.triangles[sd.elem];
    const bool flip = tri[(l + 1) % 3] != f.vertices[0];
    sd.sigma = s == 0 ? 1.0 : -1.0;
    sd.omega = f.boundary() ? 1.0 : 0.5;
    sd.phi = &T.Vedge[l][flip].values;
    if (T.Qedge[l][flip].values.size() != 0) sd.qphi = &T.Qedge[l][flip].values;
    if (need_grad) physical_gradients(T.Vedge[l][flip], T.maps[sd.elem], sd.dx, sd.dy);
  }
  return fd;
}

Matrix weighted(const Matrix& a, const Vector& w, const Matrix& b) { return a.transpose() * w.asDiagonal() * b; }

}  // namespace

Forms::Forms(SpacePtr velocity, SpacePtr pressure, SchemeParams params)
    : V_(std::move(velocity)), Q_(std::move(pressure)), params_(params), tab_(std::make_unique<Tables>()) {
  params_.validate();
  if (!V_ || V_->components() != 2) throw std::invalid_argument("Forms: velocity space must be a vector space");
  if (Q_ && (!Q_->same_mesh(*V_) || Q_->components() != 1))
    throw std::invalid_argument("Forms: pressure space must be scalar and share the velocity mesh");
  const bool cg = V_->kind() == SpaceKind::CG;
  if (cg != (params_.scheme == Scheme::H1)) throw std::invalid_argument("Forms: scheme/space kind mismatch");
  const int kv = V_->degree();
  auto& T = *tab_;
  T.vq = triangle_quadrature<double>(params_.volume_quadrature >= 0 ? params_.volume_quadrature : std::min(12, 3 * kv));
  T.eq = edge_quadrature<double>(params_.edge_quadrature >= 0 ? params_.edge_quadrature : 3 * kv + 1);
  T.Vvol = V_->tabulate(T.vq.points);
  T.nlV = V_->local_size();
  if (Q_) {
    T.Qvol = Q_->tabulate(T.vq.points);
    T.nlQ = Q_->local_size();
  }
  for (int l = 0; l < 3; ++l)
    for (int f = 0; f < 2; ++f) {
      const auto p = edge_points(T.eq, l, f == 1);
      T.Vedge[l][f] = V_->tabulate(p);
      if (Q_) T.Qedge[l][f] = Q_->tabulate(p);
    }
  const Mesh& mesh = V_->mesh();
  T.maps.reserve(mesh.num_elements());
  for (int e = 0; e < mesh.num_elements(); ++e) T.maps.push_back(element_map(mesh, e));
  if (cg) dirichlet_ = V_->boundary_dofs();
}

Forms::~Forms() = default;

void Forms::assemble_mass(BlockSink& sink) const {
  const auto& T = *tab_;
  for (int e = 0; e < V_->mesh().num_elements(); ++e) {
    const Vector w = T.vq.weights * T.maps[e].abs_det();
    const Matrix Me = weighted(T.Vvol.values, w, T.Vvol.values);
    const auto dofs = V_->element_dofs(e);
    for (int c = 0; c < 2; ++c) sink.add(comp(dofs, c, T.nlV), comp(dofs, c, T.nlV), Me);
  }
}

void Forms::assemble_viscous(BlockSink& sink) const {
  const auto& T = *tab_;
  const int nl = T.nlV;
  const StressTensor tensor = params_.effective_tensor();
  const bool h1 = params_.scheme == Scheme::H1;
  const Mesh& mesh = V_->mesh();
  Matrix dx, dy;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Vector w = T.vq.weights * T.maps[e].abs_det();
    physical_gradients(T.Vvol, T.maps[e], dx, dy);
    const Matrix* D[2] = {&dx, &dy};
    const Matrix K = weighted(dx, w, dx) + weighted(dy, w, dy);
    const auto dofs = V_->element_dofs(e);
    for (int c = 0; c < 2; ++c)
      for (int d = 0; d < 2; ++d) {
        Matrix blk = (c == d) ? K : Matrix::Zero(nl, nl);
        if (h1) {
          const double divcoef = tensor == StressTensor::Grad ? 0.0 : tensor == StressTensor::SymGrad ? 1.0 : 1.0 / 3.0;
          if (divcoef != 0.0) blk += divcoef * weighted(*D[c], w, *D[d]);
        } else if (tensor != StressTensor::Grad) {
          blk += weighted(*D[d], w, *D[c]);
          if (tensor == StressTensor::Deviatoric) blk -= (2.0 / 3.0) * weighted(*D[c], w, *D[d]);
        }
        sink.add(comp(dofs, c, nl), comp(dofs, d, nl), blk);
      }
  }
  if (h1) return;

  const double eta = params_.eta_for(pressure_degree());
  for (const auto& f : V_->topology().faces) {
    const FaceData fd = face_data(T, mesh, f, true);
    const Vec2& n = fd.n;
    // Tn[s][c][e]: component e of tau(phi e_c) n on side s.
    Matrix Tn[2][2][2];
    for (int s = 0; s < fd.nsides; ++s) {
      const Side& sd = fd.side[s];
      const Matrix Dn = n.x() * sd.dx + n.y() * sd.dy;
      for (int c = 0; c < 2; ++c)
        for (int ee = 0; ee < 2; ++ee) {
          Matrix m = (c == ee) ? Dn : Matrix::Zero(Dn.rows(), Dn.cols());
          if (tensor != StressTensor::Grad) m += n(c) * sd.D(ee);
          if (tensor == StressTensor::Deviatoric) m -= (2.0 / 3.0) * n(ee) * sd.D(c);
          Tn[s][c][ee] = std::move(m);
        }
    }
    for (int s = 0; s < fd.nsides; ++s)
      for (int t = 0; t < fd.nsides; ++t) {
        const Side &S = fd.side[s], &Tt = fd.side[t];
        const Matrix pen = (eta / fd.h * S.sigma * Tt.sigma) * weighted(*S.phi, fd.w, *Tt.phi);
        const auto rd = V_->element_dofs(S.elem), cd = V_->element_dofs(Tt.elem);
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) {
            Matrix blk = -Tt.sigma * S.omega * weighted(Tn[s][c][d], fd.w, *Tt.phi) -
                         S.sigma * Tt.omega * weighted(*S.phi, fd.w, Tn[t][d][c]);
            if (c == d) blk += pen;
            sink.add(comp(rd, c, nl), comp(cd, d, nl), blk);
          }
      }
  }
}

void Forms::assemble_divergence(BlockSink& sink) const {
  if (!Q_) throw std::logic_error("assemble_divergence: no pressure space");
  const auto& T = *tab_;
  const int nl = T.nlV;
  const Mesh& mesh = V_->mesh();
  Matrix dx, dy;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Vector w = T.vq.weights * T.maps[e].abs_det();
    physical_gradients(T.Vvol, T.maps[e], dx, dy);
    const auto vd = V_->element_dofs(e);
    const auto qd = Q_->element_dofs(e);
    sink.add(qd, comp(vd, 0, nl), weighted(T.Qvol.values, w, dx));
    sink.add(qd, comp(vd, 1, nl), weighted(T.Qvol.values, w, dy));
  }
  if (V_->kind() == SpaceKind::CG) return;
  for (const auto& f : V_->topology().faces) {
    const FaceData fd = face_data(T, mesh, f, false);
    for (int s = 0; s < fd.nsides; ++s)
      for (int t = 0; t < fd.nsides; ++t) {
        const Side &S = fd.side[s], &Tt = fd.side[t];
        const Matrix m = weighted(*S.qphi, fd.w, *Tt.phi);
        const auto qd = Q_->element_dofs(S.elem), vd = V_->element_dofs(Tt.elem);
        for (int d = 0; d < 2; ++d) sink.add(qd, comp(vd, d, nl), (-Tt.sigma * fd.n(d) * S.omega) * m);
      }
  }
}

void Forms::assemble_penalty(BlockSink& sink) const {
  const auto& T = *tab_;
  const int nl = T.nlV;
  const Mesh& mesh = V_->mesh();
  const double ggd = params_.scheme == Scheme::DgC ? params_.gamma_value() : params_.gamma_gd;
  const double gam = params_.is_dg() ? params_.gamma_value() : 0.0;
  Matrix dx, dy;
  if (ggd != 0.0)
    for (int e = 0; e < mesh.num_elements(); ++e) {
      const Vector w = T.vq.weights * T.maps[e].abs_det();
      physical_gradients(T.Vvol, T.maps[e], dx, dy);
      const Matrix* D[2] = {&dx, &dy};
      const auto dofs = V_->element_dofs(e);
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) sink.add(comp(dofs, c, nl), comp(dofs, d, nl), ggd * weighted(*D[c], w, *D[d]));
    }
  if (gam == 0.0 || !params_.is_dg()) return;
  for (const auto& f : V_->topology().faces) {
    const FaceData fd = face_data(T, mesh, f, false);
    for (int s = 0; s < fd.nsides; ++s)
      for (int t = 0; t < fd.nsides; ++t) {
        const Side &S = fd.side[s], &Tt = fd.side[t];
        const Matrix m = (gam / fd.h * S.sigma * Tt.sigma) * weighted(*S.phi, fd.w, *Tt.phi);
        const auto rd = V_->element_dofs(S.elem), cd = V_->element_dofs(Tt.elem);
        for (int c = 0; c < 2; ++c)
          for (int d = 0; d < 2; ++d) sink.add(comp(rd, c, nl), comp(cd, d, nl), (fd.n(c) * fd.n(d)) * m);
      }
  }
}

namespace {

// Velocity traces on a face side: values per component at the face points.
Matrix side_values(const Side& sd, const FunctionSpace& V, const Vector& u, int nl) {
  const auto dofs = V.element_dofs(sd.elem);
  Matrix out(sd.phi->rows(), 2);
  for (int c = 0; c < 2; ++c) {
    Vector coef(nl);
    for (int i = 0; i < nl; ++i) coef(i) = u(dofs[c * nl + i]);
    out.col(c) = *sd.phi * coef;
  }
  return out;
}

double sign0(double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }

}  // namespace

void Forms::assemble_convective(const Vector& u, BlockSink& sink, bool v_slot, bool beta_slot) const {
  if (u.size() != nv()) throw std::invalid_argument("assemble_convective: state length mismatch");
  const auto& T = *tab_;
  const int nl = T.nlV;
  const Mesh& mesh = V_->mesh();
  const Scheme sch = params_.scheme;
  const double kappa = sch == Scheme::DgC ? 0.0 : 1.0;
  Matrix dx, dy;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Vector w = T.vq.weights * T.maps[e].abs_det();
    physical_gradients(T.Vvol, T.maps[e], dx, dy);
    const Matrix* D[2] = {&dx, &dy};
    const auto dofs = V_->element_dofs(e);
    Vector coef[2];
    Vector U[2], dU[2][2];
    for (int c = 0; c < 2; ++c) {
      coef[c].resize(nl);
      for (int i = 0; i < nl; ++i) coef[c](i) = u(dofs[c * nl + i]);
      U[c] = T.Vvol.values * coef[c];
      dU[c][0] = dx * coef[c];
      dU[c][1] = dy * coef[c];
    }
    const Vector div = dU[0][0] + dU[1][1];
    const Matrix& Phi = T.Vvol.values;
    const Matrix PhiW = Phi.transpose() * w.asDiagonal();
    if (v_slot) {
      const Matrix Tv = U[0].asDiagonal() * dx + U[1].asDiagonal() * dy + (0.5 * kappa) * (div.asDiagonal() * Phi);
      const Matrix blk = PhiW * Tv;
      for (int c = 0; c < 2; ++c) sink.add(comp(dofs, c, nl), comp(dofs, c, nl), blk);
    }
    if (beta_slot)
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) {
          const Matrix Tb = dU[c][d].asDiagonal() * Phi + (0.5 * kappa) * (U[c].asDiagonal() * *D[d]);
          sink.add(comp(dofs, c, nl), comp(dofs, d, nl), PhiW * Tb);
        }
  }
  if (sch == Scheme::H1) return;

  const double zeta = sch == Scheme::DgC ? 0.5 : params_.zeta_value();
  const double t4 = sch == Scheme::DgC ? 0.0 : 1.0;
  for (const auto& f : V_->topology().faces) {
    if (f.boundary() && sch == Scheme::DgC) continue;
    const FaceData fd = face_data(T, mesh, f, false);
    const Vec2& n = fd.n;
    Matrix us[2];
    for (int s = 0; s < fd.nsides; ++s) us[s] = side_values(fd.side[s], *V_, u, nl);
    Matrix ub, uj;
    if (fd.nsides == 2) {
      ub = 0.5 * (us[0] + us[1]);
      uj = us[0] - us[1];
    } else {
      ub = us[0];
      uj = us[0];
    }
    const Vector a = ub * n, aj = uj * n;
    const Vector absa = a.cwiseAbs();
    const Vector sg = a.unaryExpr([](double v) { return sign0(v); });
    const bool interior = fd.nsides == 2;
    for (int s = 0; s < fd.nsides; ++s)
      for (int t = 0; t < fd.nsides; ++t) {
        const Side &S = fd.side[s], &Tt = fd.side[t];
        const auto rd = V_->element_dofs(S.elem), cd = V_->element_dofs(Tt.elem);
        if (v_slot) {
          Vector cv = zeta * S.sigma * Tt.sigma * absa;
          if (interior) {
            cv -= (Tt.sigma * S.omega) * a;
            if (s == t) cv -= (0.5 * t4 * S.omega) * aj;
          }
          const Matrix blk = weighted(*S.phi, fd.w.cwiseProduct(cv), *Tt.phi);
          for (int c = 0; c < 2; ++c) sink.add(comp(rd, c, nl), comp(cd, c, nl), blk);
        }
        if (beta_slot)
          for (int c = 0; c < 2; ++c)
            for (int d = 0; d < 2; ++d) {
              Vector cb = (zeta * Tt.omega * n(d) * S.sigma) * sg.cwiseProduct(uj.col(c));
              if (interior) {
                cb -= (Tt.omega * n(d) * S.omega) * uj.col(c);
                cb -= (0.5 * t4 * Tt.sigma * n(d) * S.omega) * us[s].col(c);
              }
              sink.add(comp(rd, c, nl), comp(cd, d, nl), weighted(*S.phi, fd.w.cwiseProduct(cb), *Tt.phi));
            }
      }
  }
}

Vector Forms::convective_residual(const Vector& u) const {
  if (u.size() != nv()) throw std::invalid_argument("convective_residual: state length mismatch");
  const auto& T = *tab_;
  const int nl = T.nlV;
  const Mesh& mesh = V_->mesh();
  const Scheme sch = params_.scheme;
  const double kappa = sch == Scheme::DgC ? 0.0 : 1.0;
  Vector r = Vector::Zero(nv());
  Matrix dx, dy;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const Vector w = T.vq.weights * T.maps[e].abs_det();
    physical_gradients(T.Vvol, T.maps[e], dx, dy);
    const auto dofs = V_->element_dofs(e);
    Vector U[2], Ux[2], Uy[2];
    for (int c = 0; c < 2; ++c) {
      Vector coef(nl);
      for (int i = 0; i < nl; ++i) coef(i) = u(dofs[c * nl + i]);
      U[c] = T.Vvol.values * coef;
      Ux[c] = dx * coef;
      Uy[c] = dy * coef;
    }
    const Vector div = Ux[0] + Uy[1];
    for (int c = 0; c < 2; ++c) {
      const Vector integrand =
          U[0].cwiseProduct(Ux[c]) + U[1].cwiseProduct(Uy[c]) + (0.5 * kappa) * div.cwiseProduct(U[c]);
      const Vector loc = T.Vvol.values.transpose() * w.cwiseProduct(integrand);
      for (int i = 0; i < nl; ++i) r(dofs[c * nl + i]) += loc(i);
    }
  }
  if (sch == Scheme::H1) return r;

  const double zeta = sch == Scheme::DgC ? 0.5 : params_.zeta_value();
  const double t4 = sch == Scheme::DgC ? 0.0 : 1.0;
  for (const auto& f : V_->topology().faces) {
    if (f.boundary() && sch == Scheme::DgC) continue;
    const FaceData fd = face_data(T, mesh, f, false);
    Matrix us[2];
    for (int s = 0; s < fd.nsides; ++s) us[s] = side_values(fd.side[s], *V_, u, nl);
    const bool interior = fd.nsides == 2;
    const Matrix ub = interior ? Matrix(0.5 * (us[0] + us[1])) : us[0];
    const Matrix uj = interior ? Matrix(us[0] - us[1]) : us[0];
    const Vector a = ub * fd.n, aj = uj * fd.n;
    const Vector absa = a.cwiseAbs();
    for (int s = 0; s < fd.nsides; ++s) {
      const Side& S = fd.side[s];
      const auto dofs = V_->element_dofs(S.elem);
      for (int c = 0; c < 2; ++c) {
        Vector integrand = (zeta * S.sigma) * absa.cwiseProduct(uj.col(c));
        if (interior)
          integrand -= S.omega * (a.cwiseProduct(uj.col(c)) + (0.5 * t4) * aj.cwiseProduct(us[s].col(c)));
        const Vector loc = S.phi->transpose() * fd.w.cwiseProduct(integrand);
        for (int i = 0; i < nl; ++i) r(dofs[c * nl + i]) += loc(i);
      }
    }
  }
  return r;
}

SparseOperator Forms::convective(const Vector& beta) const {
  TripletSink s;
  assemble_convective(beta, s, true, false);
  return s.finish(nv(), nv());
}

SparseOperator Forms::convective_jacobian(const Vector& u) const {
  TripletSink s;
  assemble_convective(u, s, true, true);
  return s.finish(nv(), nv());
}

const SparseOperator& Forms::mass() const {
  if (!mass_) {
    TripletSink s;
    assemble_mass(s);
    mass_ = s.finish(nv(), nv());
  }
  return *mass_;
}

const SparseOperator& Forms::viscous() const {
  if (!viscous_) {
    TripletSink s;
    assemble_viscous(s);
    viscous_ = s.finish(nv(), nv());
  }
  return *viscous_;
}

const SparseOperator& Forms::divergence() const {
  if (!divergence_) {
    TripletSink s;
    assemble_divergence(s);
    divergence_ = s.finish(nq(), nv());
  }
  return *divergence_;
}

const SparseOperator& Forms::penalty() const {
  if (!penalty_) {
    TripletSink s;
    assemble_penalty(s);
    penalty_ = s.finish(nv(), nv());
  }
  return *penalty_;
}

const Vector& Forms::mean_weights() const {
  if (!mean_) {
    if (!Q_) throw std::logic_error("mean_weights: no pressure space");
    const auto& T = *tab_;
    Vector w = Vector::Zero(nq());
    const Vector colint = T.Qvol.values.transpose() * T.vq.weights;
    for (int e = 0; e < V_->mesh().num_elements(); ++e) {
      const auto qd = Q_->element_dofs(e);
      for (int i = 0; i < T.nlQ; ++i) w(qd[i]) += colint(i) * T.maps[e].abs_det();
    }
    mean_ = std::move(w);
  }
  return *mean_;
}

BoundaryLoad Forms::boundary_load(const BoundaryData& g, double t) const {
  const auto& T = *tab_;
  const int nl = T.nlV;
  BoundaryLoad L{Vector::Zero(nv()), Vector::Zero(nq()), Vector::Zero(nv()), Vector::Zero(nv())};
  if (g.zero()) return L;
  if (!params_.is_dg()) throw std::invalid_argument("boundary_load: H1 uses strong boundary conditions");
  const StressTensor tensor = params_.effective_tensor();
  const double eta = params_.eta_for(pressure_degree());
  const double zeta = params_.zeta_value();
  const double gam = params_.gamma_value();
  const bool upwind = params_.scheme == Scheme::DgN;
  const Mesh& mesh = V_->mesh();
  for (const auto& f : V_->topology().faces) {
    if (!f.boundary()) continue;
    const FaceData fd = face_data(T, mesh, f, true);
    const Side& S = fd.side[0];
    const int nq = static_cast<int>(fd.w.size());
    const Vec2& n = fd.n;
    Matrix G(nq, 2);
    for (int i = 0; i < nq; ++i) G.row(i) = g(t, fd.x[i], f.tag).transpose();
    const Vector gn = G * n;
    const Matrix Dn = n.x() * S.dx + n.y() * S.dy;
    const auto dofs = V_->element_dofs(S.elem);
    for (int c = 0; c < 2; ++c) {
      // g . tau(phi e_c) n
      Matrix gtau = G.col(c).asDiagonal() * Dn;
      if (tensor != StressTensor::Grad) gtau += n(c) * (G.col(0).asDiagonal() * S.dx + G.col(1).asDiagonal() * S.dy);
      if (tensor == StressTensor::Deviatoric) gtau -= (2.0 / 3.0) * (gn.asDiagonal() * S.D(c));
      const Vector fa = (eta / fd.h) * (S.phi->transpose() * fd.w.cwiseProduct(G.col(c))) -
                        gtau.transpose() * fd.w;
      const Vector fc = zeta * (S.phi->transpose() * fd.w.cwiseProduct(gn.cwiseAbs().cwiseProduct(G.col(c))));
      const Vector fdv = (gam / fd.h * n(c)) * (S.phi->transpose() * fd.w.cwiseProduct(gn));
      for (int i = 0; i < nl; ++i) {
        L.fa(dofs[c * nl + i]) += fa(i);
        if (upwind) L.fc(dofs[c * nl + i]) += fc(i);
        L.fd(dofs[c * nl + i]) += fdv(i);
      }
    }
    if (Q_) {
      const Vector fb = S.qphi->transpose() * fd.w.cwiseProduct(gn);
      const auto qd = Q_->element_dofs(S.elem);
      for (int i = 0; i < T.nlQ; ++i) L.fb(qd[i]) += fb(i);
    }
  }
  return L;
}

Vector Forms::source_load(const SourceFunction& f, double t) const {
  Vector r = Vector::Zero(nv());
  if (!f) return r;
  const auto& T = *tab_;
  const int nl = T.nlV;
  const int nqp = T.vq.size();
  for (int e = 0; e < V_->mesh().num_elements(); ++e) {
    const auto& m = T.maps[e];
    const Vector w = T.vq.weights * m.abs_det();
    Matrix F(nqp, 2);
    for (int i = 0; i < nqp; ++i) F.row(i) = f(t, m(T.vq.points.col(i))).transpose();
    const Matrix loc = T.Vvol.values.transpose() * w.asDiagonal() * F;
    const auto dofs = V_->element_dofs(e);
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < nl; ++i) r(dofs[c * nl + i]) += loc(i, c);
  }
  return r;
}

std::pair<Vector, Vector> Forms::loads(const SourceFunction& f, const BoundaryData& g, double t) const {
  Vector F = source_load(f, t);
  if (!params_.is_dg()) return {F, Vector::Zero(nq())};
  BoundaryLoad L = boundary_load(g, t);
  F += params_.nu * L.fa + L.fc + L.fd;
  return {F, L.fb};
}

Vector Forms::dirichlet_values(const BoundaryData& g, double t) const {
  const int ns = V_->scalar_dofs();
  Vector out(dirichlet_.size());
  const auto& nodes = V_->node_coordinates();
  for (std::size_t i = 0; i < dirichlet_.size(); ++i) {
    const int dof = dirichlet_[i];
    const int c = dof / ns;
    out(i) = g(t, nodes[dof % ns], 0)(c);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

namespace {

SchemeParams params_for_space(const FunctionSpace& V, SchemeParams p) {
  if ((V.kind() == SpaceKind::CG) != (p.scheme == Scheme::H1))
    throw std::invalid_argument("scheme does not match the velocity space kind");
  return p;
}

SchemeParams default_params(const FunctionSpace& V) {
  SchemeParams p;
  p.scheme = V.kind() == SpaceKind::CG ? Scheme::H1 : Scheme::DgN;
  return p;
}

}  // namespace

SparseOperator assemble_mass(const SpacePtr& space) {
  if (space->components() == 2) return Forms(space, nullptr, default_params(*space)).mass();
  // Scalar space: mass of the single component.
  const auto q = triangle_quadrature<double>(std::min(12, 2 * space->degree() + 1));
  const auto tab = space->tabulate(q.points);
  TripletSink s;
  for (int e = 0; e < space->mesh().num_elements(); ++e) {
    const Vector w = q.weights * element_map(space->mesh(), e).abs_det();
    s.add(space->element_dofs(e), space->element_dofs(e), weighted(tab.values, w, tab.values));
  }
  return s.finish(space->num_dofs(), space->num_dofs());
}

SparseOperator assemble_viscous(const SpacePtr& spaceV, const SchemeParams& params) {
  return Forms(spaceV, nullptr, params_for_space(*spaceV, params)).viscous();
}

SparseOperator assemble_bh(const SpacePtr& spaceV, const SpacePtr& spaceQ) {
  if (!spaceQ || !spaceV->same_mesh(*spaceQ)) throw std::invalid_argument("assemble_bh: mesh mismatch");
  return Forms(spaceV, spaceQ, default_params(*spaceV)).divergence();
}

SparseOperator assemble_dh(const SpacePtr& spaceV, const SchemeParams& params) {
  return Forms(spaceV, nullptr, params_for_space(*spaceV, params)).penalty();
}

SparseOperator assemble_convective(const FieldVec& beta, const SchemeParams& params) {
  return Forms(beta.space, nullptr, params_for_space(*beta.space, params)).convective(beta.coeffs);
}

SparseOperator convective_jacobian(const FieldVec& u, const SchemeParams& params) {
  return Forms(u.space, nullptr, params_for_space(*u.space, params)).convective_jacobian(u.coeffs);
}

BoundaryLoad assemble_boundary_load(const BoundaryData& g, double t, const SpacePtr& spaceV, const SpacePtr& spaceQ,
                                    const SchemeParams& params) {
  return Forms(spaceV, spaceQ, params_for_space(*spaceV, params)).boundary_load(g, t);
}

Vector residual(const Forms& forms, const Vector& u, const Vector& p, double multiplier, const SourceFunction& f,
                const BoundaryData& g, double t) {
  const int nv = forms.nv(), nq = forms.nq();
  if (u.size() != nv || p.size() != nq) throw std::invalid_argument("residual: dimension mismatch");
  const auto& P = forms.params();
  auto [F, fb] = forms.loads(f, g, t);
  Vector r(nv + nq + 1);
  r.head(nv) = forms.convective_residual(u) + P.nu * (forms.viscous() * u) + forms.penalty() * u -
               forms.divergence().transpose() * p - F;
  r.segment(nv, nq) = forms.divergence() * u + fb + multiplier * forms.mean_weights();
  r(nv + nq) = forms.mean_weights().dot(p);
  if (!P.is_dg()) {
    const Vector gv = forms.dirichlet_values(g, t);
    const auto& dd = forms.dirichlet_dofs();
    for (std::size_t i = 0; i < dd.size(); ++i) r(dd[i]) = u(dd[i]) - gv(i);
  }
  return r;
}

void write_matrix_market(const std::string& path, const SparseOperator& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "%%MatrixMarket matrix coordinate real general\n" << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
  out.precision(17);
  for (int j = 0; j < m.outerSize(); ++j)
    for (SparseOperator::InnerIterator it(m, j); it; ++it) out << it.row() + 1 << ' ' << j + 1 << ' ' << it.value() << '\n';
}

}  // namespace nsdg
