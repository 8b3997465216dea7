#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "nsdg/basis.hpp"
#include "nsdg/mesh.hpp"
#include "nsdg/types.hpp"

namespace nsdg {

enum class SpaceKind { DG, CG };
enum class FieldRole { Velocity, Pressure };

using ScalarFunction = std::function<double(const Vec2&)>;
using VectorFunction = std::function<Vec2(const Vec2&)>;

AffineMap<double> element_map(const Mesh& mesh, int e);

class FunctionSpace {
 public:
  static std::shared_ptr<const FunctionSpace> build(std::shared_ptr<const Mesh> mesh, SpaceKind kind, int k,
                                                    int components,
                                                    std::shared_ptr<const FaceTopology> topology = nullptr);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  const FaceTopology& topology() const { return *topology_; }
  const std::shared_ptr<const FaceTopology>& topology_ptr() const { return topology_; }

  SpaceKind kind() const { return kind_; }
  int degree() const { return degree_; }
  int components() const { return components_; }
  int local_size() const { return nloc_; }  // per component
  int element_size() const { return nloc_ * components_; }
  int num_dofs() const { return ndofs_; }
  int scalar_dofs() const { return ndofs_ / components_; }

  // Global indices of element e, local index = component * local_size() + i.
  std::span<const int> element_dofs(int e) const {
    return {elem_dofs_.data() + static_cast<std::size_t>(e) * element_size(), static_cast<std::size_t>(element_size())};
  }
  // True when every element's dofs form one contiguous ascending range.
  bool contiguous_elements() const { return kind_ == SpaceKind::DG; }

  // Local shape functions (values and reference gradients).
  Tabulation<double> tabulate(const Points2<double>& ref_points) const;

  // CG only: scalar node coordinates and boundary node list (scalar indices).
  const std::vector<Vec2>& node_coordinates() const { return nodes_; }
  const std::vector<int>& boundary_nodes() const { return boundary_nodes_; }
  // All components of the boundary nodes.
  std::vector<int> boundary_dofs() const;

  bool same_mesh(const FunctionSpace& other) const { return mesh_ == other.mesh_; }

 private:
  FunctionSpace() = default;

  std::shared_ptr<const Mesh> mesh_;
  std::shared_ptr<const FaceTopology> topology_;
  SpaceKind kind_ = SpaceKind::DG;
  int degree_ = 0;
  int components_ = 1;
  int nloc_ = 0;
  int ndofs_ = 0;
  std::vector<int> elem_dofs_;
  ReferenceBasis<double> modal_{0};
  Matrix to_local_;  // modal -> nodal (CG); empty for DG
  std::vector<Vec2> nodes_;
  std::vector<int> boundary_nodes_;
};

using SpacePtr = std::shared_ptr<const FunctionSpace>;

inline SpacePtr build_space(std::shared_ptr<const Mesh> mesh, SpaceKind kind, int k, int components,
                            std::shared_ptr<const FaceTopology> topology = nullptr) {
  return FunctionSpace::build(std::move(mesh), kind, k, components, std::move(topology));
}

struct FieldVec {
  SpacePtr space;
  Vector coeffs;
  FieldRole role = FieldRole::Velocity;

  FieldVec() = default;
  FieldVec(SpacePtr s, FieldRole r) : space(std::move(s)), coeffs(Vector::Zero(space->num_dofs())), role(r) {}
  FieldVec(SpacePtr s, Vector c, FieldRole r) : space(std::move(s)), coeffs(std::move(c)), role(r) {}
};

// quad_degree is raised to at least 2k.
FieldVec l2_project(const VectorFunction& f, const SpacePtr& space, int quad_degree);
FieldVec l2_project(const ScalarFunction& f, const SpacePtr& space, int quad_degree, FieldRole role = FieldRole::Pressure);

// Nodal interpolation, CG spaces only.
FieldVec interpolate(const VectorFunction& f, const SpacePtr& space);

double l2_error(const FieldVec& field, const VectorFunction& exact, int quad_degree);
double l2_error(const FieldVec& field, const ScalarFunction& exact, int quad_degree);

Vector eval_field(const FieldVec& field, int element, const Vec2& ref_point);
double mean_value(const FieldVec& field);

// One row per element quadrature point: element,refx,refy,physx,physy,value...
void write_field_csv(std::ostream& out, const FieldVec& field, int quad_degree);

}  // namespace nsdg
