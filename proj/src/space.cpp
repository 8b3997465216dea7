#include "nsdg/space.hpp"

#include <algorithm>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>

namespace nsdg {

AffineMap<double> element_map(const Mesh& mesh, int e) {
  const auto& t = mesh.triangles.at(e);
  return affine_map<double>(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]);
}

std::shared_ptr<const FunctionSpace> FunctionSpace::build(std::shared_ptr<const Mesh> mesh, SpaceKind kind, int k,
                                                          int components,
                                                          std::shared_ptr<const FaceTopology> topology) {
  if (!mesh) throw std::invalid_argument("build_space: null mesh");
  if (components != 1 && components != 2) throw std::invalid_argument("build_space: components must be 1 or 2");
  if (k < 0 || k > ReferenceBasis<double>::kMaxDegree) throw std::invalid_argument("build_space: degree out of range");
  if (kind == SpaceKind::CG && k < 1) throw std::invalid_argument("build_space: CG requires degree >= 1");

  std::shared_ptr<FunctionSpace> s(new FunctionSpace());
  s->mesh_ = mesh;
  s->topology_ = topology ? std::move(topology) : std::make_shared<const FaceTopology>(extract_faces(*mesh));
  s->kind_ = kind;
  s->degree_ = k;
  s->components_ = components;
  s->modal_ = ReferenceBasis<double>(k);
  s->nloc_ = s->modal_.size();
  const int ne = mesh->num_elements();
  const int esize = s->nloc_ * components;
  s->elem_dofs_.resize(static_cast<std::size_t>(ne) * esize);

  if (kind == SpaceKind::DG) {
    s->ndofs_ = ne * esize;
    for (int i = 0; i < ne * esize; ++i) s->elem_dofs_[i] = i;
    return s;
  }

  const Points2<double> ref_nodes = lagrange_nodes<double>(k);
  s->to_local_ = s->modal_.tabulate(ref_nodes).values.inverse();

  using Key = std::vector<std::pair<int, int>>;
  std::map<Key, int> ids;
  std::vector<int> scalar_map(static_cast<std::size_t>(ne) * s->nloc_);
  std::vector<Key> keys;
  for (int e = 0; e < ne; ++e) {
    const auto& t = mesh->triangles[e];
    for (int n = 0; n < s->nloc_; ++n) {
      const int i = static_cast<int>(std::lround(ref_nodes(0, n) * k));
      const int j = static_cast<int>(std::lround(ref_nodes(1, n) * k));
      Key key;
      for (auto [v, w] : {std::pair{t[0], k - i - j}, std::pair{t[1], i}, std::pair{t[2], j}})
        if (w > 0) key.emplace_back(v, w);
      std::sort(key.begin(), key.end());
      auto [it, inserted] = ids.emplace(key, static_cast<int>(keys.size()));
      if (inserted) {
        keys.push_back(key);
        Vec2 x = Vec2::Zero();
        for (auto [v, w] : key) x += mesh->vertices[v] * (static_cast<double>(w) / k);
        s->nodes_.push_back(x);
      }
      scalar_map[static_cast<std::size_t>(e) * s->nloc_ + n] = it->second;
    }
  }
  const int nscalar = static_cast<int>(keys.size());
  s->ndofs_ = nscalar * components;
  for (int e = 0; e < ne; ++e)
    for (int c = 0; c < components; ++c)
      for (int n = 0; n < s->nloc_; ++n)
        s->elem_dofs_[static_cast<std::size_t>(e) * esize + c * s->nloc_ + n] =
            c * nscalar + scalar_map[static_cast<std::size_t>(e) * s->nloc_ + n];

  std::set<int> bverts;
  std::set<std::pair<int, int>> bedges;
  for (const auto& f : s->topology_->faces)
    if (f.boundary()) {
      bverts.insert(f.vertices[0]);
      bverts.insert(f.vertices[1]);
      bedges.emplace(std::min(f.vertices[0], f.vertices[1]), std::max(f.vertices[0], f.vertices[1]));
    }
  for (int n = 0; n < nscalar; ++n) {
    const auto& key = keys[n];
    const bool on = (key.size() == 1 && bverts.count(key[0].first)) ||
                    (key.size() == 2 && bedges.count({key[0].first, key[1].first}));
    if (on) s->boundary_nodes_.push_back(n);
  }
  return s;
}

std::vector<int> FunctionSpace::boundary_dofs() const {
  std::vector<int> out;
  for (int c = 0; c < components_; ++c)
    for (int n : boundary_nodes_) out.push_back(c * scalar_dofs() + n);
  return out;
}

Tabulation<double> FunctionSpace::tabulate(const Points2<double>& ref_points) const {
  auto t = modal_.tabulate(ref_points);
  if (kind_ == SpaceKind::CG) {
    t.values = t.values * to_local_;
    t.dx = t.dx * to_local_;
    t.dy = t.dy * to_local_;
  }
  return t;
}

namespace {

using PointEval = std::function<void(const Vec2&, double*)>;

FieldVec project_impl(const PointEval& f, const SpacePtr& space, int quad_degree, FieldRole role) {
  // The local mass matrix needs degree 2k to be nonsingular.
  const auto q = triangle_quadrature<double>(std::max(quad_degree, 2 * space->degree()));
  const auto tab = space->tabulate(q.points);
  const int nc = space->components(), nl = space->local_size();
  const Mesh& mesh = space->mesh();
  FieldVec out(space, role);
  std::vector<Triplet> mass;
  Vector rhs = Vector::Zero(space->num_dofs());
  double val[2];
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto map = element_map(mesh, e);
    const Vector w = q.weights * map.abs_det();
    Matrix F(q.size(), nc);
    for (int i = 0; i < q.size(); ++i) {
      f(map(q.points.col(i)), val);
      for (int c = 0; c < nc; ++c) F(i, c) = val[c];
    }
    const Matrix Me = tab.values.transpose() * w.asDiagonal() * tab.values;
    const Matrix be = tab.values.transpose() * w.asDiagonal() * F;
    const auto dofs = space->element_dofs(e);
    if (space->kind() == SpaceKind::DG) {
      const Matrix sol = Me.llt().solve(be);
      for (int c = 0; c < nc; ++c) out.coeffs.segment(dofs[c * nl], nl) = sol.col(c);
      continue;
    }
    for (int c = 0; c < nc; ++c)
      for (int i = 0; i < nl; ++i) {
        rhs(dofs[c * nl + i]) += be(i, c);
        for (int j = 0; j < nl; ++j) mass.emplace_back(dofs[c * nl + i], dofs[c * nl + j], Me(i, j));
      }
  }
  if (space->kind() == SpaceKind::CG) {
    SparseOperator M(space->num_dofs(), space->num_dofs());
    M.setFromTriplets(mass.begin(), mass.end());
    Eigen::SimplicialLDLT<SparseOperator> ldlt(M);
    if (ldlt.info() != Eigen::Success) throw std::runtime_error("l2_project: singular mass matrix");
    out.coeffs = ldlt.solve(rhs);
  }
  return out;
}

void check_degree(const FieldVec& field, int quad_degree) {
  if (!field.space) throw std::invalid_argument("l2_error: field without space");
  if (field.coeffs.size() != field.space->num_dofs()) throw std::invalid_argument("l2_error: coefficient length mismatch");
  if (quad_degree < 2 * field.space->degree() + 2)
    throw std::invalid_argument("l2_error: quadrature degree below 2k+2");
}

double error_impl(const FieldVec& field, const PointEval& f, int quad_degree, bool shift_mean) {
  check_degree(field, quad_degree);
  const auto& space = *field.space;
  const auto q = triangle_quadrature<double>(std::min(quad_degree, 12));
  const auto tab = space.tabulate(q.points);
  const int nc = space.components(), nl = space.local_size();
  const Mesh& mesh = space.mesh();
  const int ne = mesh.num_elements();
  // Two passes so the mean shift is exact: first the means, then the squared error.
  std::vector<Matrix> Fh(ne), Fx(ne);
  std::vector<Vector> W(ne);
  Eigen::Vector2d ih = Eigen::Vector2d::Zero(), ix = Eigen::Vector2d::Zero();
  double area = 0.0, val[2];
  for (int e = 0; e < ne; ++e) {
    const auto map = element_map(mesh, e);
    W[e] = q.weights * map.abs_det();
    const auto dofs = space.element_dofs(e);
    Fh[e].resize(q.size(), nc);
    Fx[e].resize(q.size(), nc);
    for (int c = 0; c < nc; ++c) {
      Vector coef(nl);
      for (int i = 0; i < nl; ++i) coef(i) = field.coeffs(dofs[c * nl + i]);
      Fh[e].col(c) = tab.values * coef;
    }
    for (int i = 0; i < q.size(); ++i) {
      f(map(q.points.col(i)), val);
      for (int c = 0; c < nc; ++c) Fx[e](i, c) = val[c];
    }
    for (int c = 0; c < nc; ++c) {
      ih(c) += W[e].dot(Fh[e].col(c));
      ix(c) += W[e].dot(Fx[e].col(c));
    }
    area += W[e].sum();
  }
  double sq = 0.0;
  for (int e = 0; e < ne; ++e)
    for (int c = 0; c < nc; ++c) {
      const double shift = shift_mean ? (ih(c) - ix(c)) / area : 0.0;
      sq += W[e].dot(((Fh[e].col(c) - Fx[e].col(c)).array() - shift).square().matrix());
    }
  return std::sqrt(std::max(sq, 0.0));
}

}  // namespace

FieldVec l2_project(const VectorFunction& f, const SpacePtr& space, int quad_degree) {
  if (space->components() != 2) throw std::invalid_argument("l2_project: vector function needs a vector space");
  return project_impl(
      [&](const Vec2& x, double* out) {
        const Vec2 v = f(x);
        out[0] = v.x();
        out[1] = v.y();
      },
      space, quad_degree, FieldRole::Velocity);
}

FieldVec l2_project(const ScalarFunction& f, const SpacePtr& space, int quad_degree, FieldRole role) {
  if (space->components() != 1) throw std::invalid_argument("l2_project: scalar function needs a scalar space");
  return project_impl([&](const Vec2& x, double* out) { out[0] = f(x); }, space, quad_degree, role);
}

FieldVec interpolate(const VectorFunction& f, const SpacePtr& space) {
  if (space->kind() != SpaceKind::CG || space->components() != 2)
    throw std::invalid_argument("interpolate: needs a CG vector space");
  FieldVec out(space, FieldRole::Velocity);
  const int n = space->scalar_dofs();
  for (int i = 0; i < n; ++i) {
    const Vec2 v = f(space->node_coordinates()[i]);
    out.coeffs(i) = v.x();
    out.coeffs(n + i) = v.y();
  }
  return out;
}

double l2_error(const FieldVec& field, const VectorFunction& exact, int quad_degree) {
  if (field.space->components() != 2) throw std::invalid_argument("l2_error: vector function on scalar field");
  return error_impl(
      field,
      [&](const Vec2& x, double* out) {
        const Vec2 v = exact(x);
        out[0] = v.x();
        out[1] = v.y();
      },
      quad_degree, false);
}

double l2_error(const FieldVec& field, const ScalarFunction& exact, int quad_degree) {
  if (field.space->components() != 1) throw std::invalid_argument("l2_error: scalar function on vector field");
  return error_impl(field, [&](const Vec2& x, double* out) { out[0] = exact(x); }, quad_degree,
                    field.role == FieldRole::Pressure);
}

Vector eval_field(const FieldVec& field, int element, const Vec2& ref_point) {
  const auto& space = *field.space;
  if (element < 0 || element >= space.mesh().num_elements()) throw std::out_of_range("eval_field: element out of range");
  Points2<double> p(2, 1);
  p.col(0) = ref_point;
  const auto tab = space.tabulate(p);
  const int nl = space.local_size();
  const auto dofs = space.element_dofs(element);
  Vector out = Vector::Zero(space.components());
  for (int c = 0; c < space.components(); ++c)
    for (int i = 0; i < nl; ++i) out(c) += field.coeffs(dofs[c * nl + i]) * tab.values(0, i);
  return out;
}

double mean_value(const FieldVec& field) {
  const auto& space = *field.space;
  if (space.components() != 1) throw std::invalid_argument("mean_value: scalar field required");
  const auto q = triangle_quadrature<double>(std::min(12, 2 * space.degree() + 1));
  const auto tab = space.tabulate(q.points);
  const int nl = space.local_size();
  double integral = 0.0, area = 0.0;
  for (int e = 0; e < space.mesh().num_elements(); ++e) {
    const double det = element_map(space.mesh(), e).abs_det();
    const auto dofs = space.element_dofs(e);
    Vector coef(nl);
    for (int i = 0; i < nl; ++i) coef(i) = field.coeffs(dofs[i]);
    integral += det * q.weights.dot(tab.values * coef);
    area += det * q.weights.sum();
  }
  return integral / area;
}

void write_field_csv(std::ostream& out, const FieldVec& field, int quad_degree) {
  const auto& space = *field.space;
  const auto q = triangle_quadrature<double>(quad_degree);
  const auto tab = space.tabulate(q.points);
  const int nc = space.components(), nl = space.local_size();
  out << "element,refx,refy,physx,physy";
  for (int c = 0; c < nc; ++c) out << ",value" << c;
  out << '\n';
  out.precision(12);
  for (int e = 0; e < space.mesh().num_elements(); ++e) {
    const auto map = element_map(space.mesh(), e);
    const auto dofs = space.element_dofs(e);
    for (int i = 0; i < q.size(); ++i) {
      const Vec2 x = map(q.points.col(i));
      out << e << ',' << q.points(0, i) << ',' << q.points(1, i) << ',' << x.x() << ',' << x.y();
      for (int c = 0; c < nc; ++c) {
        double v = 0.0;
        for (int j = 0; j < nl; ++j) v += field.coeffs(dofs[c * nl + j]) * tab.values(i, j);
        out << ',' << v;
      }
      out << '\n';
    }
  }
}

}  // namespace nsdg
