#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "nsdg/types.hpp"

namespace nsdg {

struct BoundaryTag {
  int a = 0;
  int b = 0;
  int tag = 0;
};

// Conforming triangulation. Triangles are counterclockwise.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<BoundaryTag> boundary_tags;

  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_elements() const { return static_cast<int>(triangles.size()); }

  double signed_area(int e) const;
  double area() const;
  double h_max() const;
  Vec2 bbox_min() const;
  Vec2 bbox_max() const;
  int tag_of_edge(int a, int b) const;  // 0 when untagged

  void validate() const;
};

bool operator==(const Mesh& a, const Mesh& b);

// Tags for rectangle sides.
enum RectSide : int { kBottom = 1, kRight = 2, kTop = 3, kLeft = 4 };

Mesh build_rect_mesh(double x0, double x1, double y0, double y1, int nx, int ny);

struct Face {
  std::array<int, 2> vertices{};
  int plus = -1;
  int minus = -1;  // -1 on the boundary
  int local_plus = -1;
  int local_minus = -1;
  Vec2 normal = Vec2::Zero();
  double h = 0.0;
  int tag = 0;

  bool boundary() const { return minus < 0; }
};

struct FaceTopology {
  std::vector<Face> faces;
  // element_faces[e][l]: face opposite local vertex l.
  std::vector<std::array<int, 3>> element_faces;
  // true when the element is K+ of that face.
  std::vector<std::array<bool, 3>> element_is_plus;

  int num_interior() const;
  int num_boundary() const;
};

FaceTopology extract_faces(const Mesh& mesh);

// Local edge l of a triangle runs from local vertex (l+1)%3 to (l+2)%3.
inline std::array<int, 2> local_edge(int l) { return {(l + 1) % 3, (l + 2) % 3}; }

Mesh mesh_from_stream(std::istream& in);
Mesh mesh_from_file(const std::filesystem::path& path);
void write_mesh(std::ostream& out, const Mesh& mesh);
void write_mesh(const std::filesystem::path& path, const Mesh& mesh);

}  // namespace nsdg
