#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nsdg/mesh.hpp"

using namespace nsdg;
using std::numbers::pi;

namespace {

Vec2 centroid(const Mesh& m, int e) {
  const auto& t = m.triangles[e];
  return (m.vertices[t[0]] + m.vertices[t[1]] + m.vertices[t[2]]) / 3.0;
}

std::string error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    mesh_from_stream(in);
  } catch (const std::exception& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("rect mesh: Taylor-Green 10x10 has 200 triangles and h_max 0.8886") {
  const auto m = build_rect_mesh(0, 2 * pi, 0, 2 * pi, 10, 10);
  CHECK(m.num_elements() == 200);
  CHECK(m.h_max() == doctest::Approx(0.8886).epsilon(1e-4));
  CHECK(m.h_max() == doctest::Approx(std::sqrt(2.0) * 2 * pi / 10).epsilon(1e-14));
}

TEST_CASE("rect mesh: unit square single cell and anisotropic cells") {
  const auto m = build_rect_mesh(0, 1, 0, 1, 1, 1);
  CHECK(m.num_elements() == 2);
  CHECK(m.area() == doctest::Approx(1.0).epsilon(1e-15));
  const auto m2 = build_rect_mesh(0, 1, 0, 2, 4, 8);
  CHECK(m2.h_max() == doctest::Approx(std::sqrt(0.25 * 0.25 * 2)).epsilon(1e-14));
  CHECK(m2.num_elements() == 64);
}

TEST_CASE("rect mesh: diagonal runs lower-left to upper-right") {
  const auto m = build_rect_mesh(0, 1, 0, 1, 1, 1);
  // Both triangles contain (0,0) and (1,1).
  for (const auto& t : m.triangles) {
    int hits = 0;
    for (int v : t) {
      const Vec2& x = m.vertices[v];
      if ((x - Vec2(0, 0)).norm() < 1e-15 || (x - Vec2(1, 1)).norm() < 1e-15) ++hits;
    }
    CHECK(hits == 2);
  }
}

TEST_CASE("rect mesh: invalid extents are rejected") {
  CHECK_THROWS_AS(build_rect_mesh(1, 0, 0, 1, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_rect_mesh(0, 1, 0, 0, 2, 2), std::invalid_argument);
  CHECK_THROWS_AS(build_rect_mesh(0, 1, 0, 1, 0, 2), std::invalid_argument);
}

TEST_CASE("mesh invariants: positive areas and area sum") {
  const auto m = build_rect_mesh(-0.5, 1.5, 0, 2, 7, 5);
  double sum = 0;
  for (int e = 0; e < m.num_elements(); ++e) {
    CHECK(m.signed_area(e) > 0);
    sum += m.signed_area(e);
  }
  CHECK(sum == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_NOTHROW(m.validate());
}

TEST_CASE("faces: counts") {
  const auto topo1 = extract_faces(build_rect_mesh(0, 1, 0, 1, 1, 1));
  CHECK(topo1.num_interior() == 1);
  CHECK(topo1.num_boundary() == 4);

  const auto m = build_rect_mesh(0, 2 * pi, 0, 2 * pi, 10, 10);
  const auto topo = extract_faces(m);
  CHECK(2 * topo.num_interior() + topo.num_boundary() == 3 * 200);
  CHECK(topo.num_boundary() == 40);
}

TEST_CASE("faces: normals, orientation and K+ rule") {
  const auto m = build_rect_mesh(-1, 1, -1, 1, 6, 4);
  const auto topo = extract_faces(m);
  const Vec2 center(0, 0);
  for (const auto& f : topo.faces) {
    CHECK(std::abs(f.normal.norm() - 1.0) <= 1e-14);
    const Vec2 a = m.vertices[f.vertices[0]], b = m.vertices[f.vertices[1]];
    CHECK(f.h == doctest::Approx((b - a).norm()).epsilon(1e-15));
    CHECK(f.h > 0);
    CHECK(std::abs(f.normal.dot(b - a)) <= 1e-14);
    const Vec2 mid = 0.5 * (a + b);
    if (f.boundary()) {
      CHECK(f.normal.dot(mid - center) > 0);
      CHECK(f.tag >= kBottom);
      CHECK(f.tag <= kLeft);
    } else {
      CHECK(f.plus < f.minus);
      CHECK(f.normal.dot(centroid(m, f.minus) - centroid(m, f.plus)) > 0);
      // Outward normal of K- on this edge, from its own geometry.
      const Vec2 c = centroid(m, f.minus);
      Vec2 n(b[1] - a[1], a[0] - b[0]);
      n.normalize();
      if (n.dot(mid - c) < 0) n = -n;
      CHECK((f.normal + n).norm() <= 1e-14);
    }
  }
}

TEST_CASE("faces: element_faces is consistent with local edges") {
  const auto m = build_rect_mesh(0, 1, 0, 1, 3, 3);
  const auto topo = extract_faces(m);
  for (int e = 0; e < m.num_elements(); ++e) {
    for (int l = 0; l < 3; ++l) {
      const auto& f = topo.faces[topo.element_faces[e][l]];
      const auto le = local_edge(l);
      const int va = m.triangles[e][le[0]], vb = m.triangles[e][le[1]];
      CHECK(std::min(va, vb) == std::min(f.vertices[0], f.vertices[1]));
      CHECK(std::max(va, vb) == std::max(f.vertices[0], f.vertices[1]));
      CHECK(topo.element_is_plus[e][l] == (f.plus == e));
      CHECK((f.plus == e ? f.local_plus : f.local_minus) == l);
    }
  }
}

TEST_CASE("faces: extraction is deterministic") {
  const auto m = build_rect_mesh(0, 3, 0, 2, 5, 4);
  const auto a = extract_faces(m), b = extract_faces(m);
  REQUIRE(a.faces.size() == b.faces.size());
  for (std::size_t i = 0; i < a.faces.size(); ++i) {
    CHECK(a.faces[i].vertices == b.faces[i].vertices);
    CHECK(a.faces[i].plus == b.faces[i].plus);
    CHECK(a.faces[i].minus == b.faces[i].minus);
    CHECK(a.faces[i].normal == b.faces[i].normal);
  }
}

TEST_CASE("faces: non-manifold edge is rejected") {
  Mesh m;
  m.vertices = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1), Vec2(1, 1), Vec2(0.5, 2)};
  m.triangles = {{0, 1, 2}, {1, 3, 2}, {1, 4, 2}};
  CHECK_THROWS(extract_faces(m));
}

TEST_CASE("mesh file: single triangle") {
  std::istringstream in("ns-mesh 1\n3\n0 0\n1 0\n0 1\n1\n0 1 2\n");
  const auto m = mesh_from_stream(in);
  CHECK(m.num_vertices() == 3);
  CHECK(m.num_elements() == 1);
  CHECK(m.area() == doctest::Approx(0.5));
}

TEST_CASE("mesh file: round trip") {
  const auto m = build_rect_mesh(0, 2, -1, 1, 4, 3);
  std::stringstream ss;
  write_mesh(ss, m);
  const auto r = mesh_from_stream(ss);
  CHECK(r == m);
  CHECK(r.tag_of_edge(r.triangles[0][0], r.triangles[0][1]) == m.tag_of_edge(m.triangles[0][0], m.triangles[0][1]));
}

TEST_CASE("mesh file: errors carry line numbers") {
  const auto bad_index = error_of("ns-mesh 1\n3\n0 0\n1 0\n0 1\n1\n0 1 99\n");
  CHECK(bad_index.find("line 7") != std::string::npos);
  CHECK(bad_index.find("99") != std::string::npos);
  CHECK(error_of("mesh 2\n").find("line 1") != std::string::npos);
  CHECK(error_of("ns-mesh 1\n3\n0 0\n1 0\n2 0\n1\n0 1 2\n").find("line 7") != std::string::npos);
  CHECK(error_of("ns-mesh 1\n3\n0 0\n1 x\n0 1\n1\n0 1 2\n").find("line 4") != std::string::npos);
  CHECK(error_of("ns-mesh 1\n3\n0 0\n1 0\n").find("unexpected end") != std::string::npos);
}
