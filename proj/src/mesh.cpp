#include "nsdg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace nsdg {

namespace {

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

double cross(const Vec2& u, const Vec2& v) { return u.x() * v.y() - u.y() * v.x(); }

}  // namespace

double Mesh::signed_area(int e) const {
  const auto& t = triangles.at(e);
  return 0.5 * cross(vertices[t[1]] - vertices[t[0]], vertices[t[2]] - vertices[t[0]]);
}

double Mesh::area() const {
  double s = 0.0;
  for (int e = 0; e < num_elements(); ++e) s += signed_area(e);
  return s;
}

double Mesh::h_max() const {
  double h = 0.0;
  for (const auto& t : triangles)
    for (int l = 0; l < 3; ++l)
      h = std::max(h, (vertices[t[l]] - vertices[t[(l + 1) % 3]]).norm());
  return h;
}

Vec2 Mesh::bbox_min() const {
  Vec2 m = Vec2::Constant(std::numeric_limits<double>::infinity());
  for (const auto& v : vertices) m = m.cwiseMin(v);
  return m;
}

Vec2 Mesh::bbox_max() const {
  Vec2 m = Vec2::Constant(-std::numeric_limits<double>::infinity());
  for (const auto& v : vertices) m = m.cwiseMax(v);
  return m;
}

int Mesh::tag_of_edge(int a, int b) const {
  for (const auto& bt : boundary_tags)
    if ((bt.a == a && bt.b == b) || (bt.a == b && bt.b == a)) return bt.tag;
  return 0;
}

void Mesh::validate() const {
  const int nv = num_vertices();
  std::unordered_map<std::uint64_t, int> edges;
  for (int e = 0; e < num_elements(); ++e) {
    const auto& t = triangles[e];
    for (int v : t)
      if (v < 0 || v >= nv) throw std::invalid_argument("triangle " + std::to_string(e) + ": vertex index out of range");
    if (!(signed_area(e) > 0.0))
      throw std::invalid_argument("triangle " + std::to_string(e) + ": non-positive signed area");
    for (int l = 0; l < 3; ++l) {
      const auto le = local_edge(l);
      if (++edges[edge_key(t[le[0]], t[le[1]])] > 2)
        throw std::invalid_argument("non-manifold edge at triangle " + std::to_string(e));
    }
  }
}

bool operator==(const Mesh& a, const Mesh& b) {
  if (a.vertices.size() != b.vertices.size() || a.triangles != b.triangles) return false;
  for (std::size_t i = 0; i < a.vertices.size(); ++i)
    if (a.vertices[i] != b.vertices[i]) return false;
  if (a.boundary_tags.size() != b.boundary_tags.size()) return false;
  for (std::size_t i = 0; i < a.boundary_tags.size(); ++i) {
    const auto &x = a.boundary_tags[i], &y = b.boundary_tags[i];
    if (x.a != y.a || x.b != y.b || x.tag != y.tag) return false;
  }
  return true;
}

Mesh build_rect_mesh(double x0, double x1, double y0, double y1, int nx, int ny) {
  if (!(x1 > x0) || !(y1 > y0)) throw std::invalid_argument("build_rect_mesh: empty extent");
  if (nx < 1 || ny < 1) throw std::invalid_argument("build_rect_mesh: cell counts must be >= 1");
  Mesh m;
  m.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      // Exact end coordinates so boundary tests like y == y1 are reliable.
      const double x = (i == nx) ? x1 : x0 + (x1 - x0) * i / nx;
      const double y = (j == ny) ? y1 : y0 + (y1 - y0) * j / ny;
      m.vertices.emplace_back(x, y);
    }
  auto vid = [nx](int i, int j) { return j * (nx + 1) + i; };
  m.triangles.reserve(2 * static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
      m.triangles.push_back({a, b, c});
      m.triangles.push_back({a, c, d});
    }
  for (int i = 0; i < nx; ++i) {
    m.boundary_tags.push_back({vid(i, 0), vid(i + 1, 0), kBottom});
    m.boundary_tags.push_back({vid(i + 1, ny), vid(i, ny), kTop});
  }
  for (int j = 0; j < ny; ++j) {
    m.boundary_tags.push_back({vid(nx, j), vid(nx, j + 1), kRight});
    m.boundary_tags.push_back({vid(0, j + 1), vid(0, j), kLeft});
  }
  return m;
}

int FaceTopology::num_interior() const {
  return static_cast<int>(std::count_if(faces.begin(), faces.end(), [](const Face& f) { return !f.boundary(); }));
}

int FaceTopology::num_boundary() const { return static_cast<int>(faces.size()) - num_interior(); }

FaceTopology extract_faces(const Mesh& mesh) {
  mesh.validate();
  std::unordered_map<std::uint64_t, int> tags;
  for (const auto& bt : mesh.boundary_tags) tags[edge_key(bt.a, bt.b)] = bt.tag;

  FaceTopology topo;
  const int ne = mesh.num_elements();
  topo.element_faces.assign(ne, {-1, -1, -1});
  topo.element_is_plus.assign(ne, {false, false, false});
  std::unordered_map<std::uint64_t, int> seen;
  seen.reserve(3 * static_cast<std::size_t>(ne));
  // Elements are visited in increasing order, so the first visitor is K+.
  for (int e = 0; e < ne; ++e) {
    const auto& t = mesh.triangles[e];
    for (int l = 0; l < 3; ++l) {
      const auto le = local_edge(l);
      const int a = t[le[0]], b = t[le[1]];
      const auto key = edge_key(a, b);
      auto it = seen.find(key);
      if (it == seen.end()) {
        Face f;
        f.vertices = {a, b};
        f.plus = e;
        f.local_plus = l;
        const Vec2 d = mesh.vertices[b] - mesh.vertices[a];
        f.h = d.norm();
        f.normal = Vec2(d.y(), -d.x()) / f.h;  // outward for a CCW triangle
        seen.emplace(key, static_cast<int>(topo.faces.size()));
        topo.element_faces[e][l] = static_cast<int>(topo.faces.size());
        topo.element_is_plus[e][l] = true;
        topo.faces.push_back(f);
      } else {
        Face& f = topo.faces[it->second];
        if (f.minus >= 0) throw std::invalid_argument("extract_faces: non-manifold edge");
        f.minus = e;
        f.local_minus = l;
        topo.element_faces[e][l] = it->second;
      }
    }
  }
  for (auto& f : topo.faces)
    if (f.boundary()) {
      auto it = tags.find(edge_key(f.vertices[0], f.vertices[1]));
      f.tag = it == tags.end() ? 0 : it->second;
    }
  return topo;
}

namespace {

struct LineReader {
  std::istream& in;
  int line = 0;
  std::string text;

  bool next() {
    while (std::getline(in, text)) {
      ++line;
      const auto p = text.find_first_not_of(" \t\r");
      if (p != std::string::npos && text[p] != '#') return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error("mesh file line " + std::to_string(line) + ": " + what);
  }
  void require(const std::string& what) {
    if (!next()) fail("unexpected end of file, expected " + what);
  }
};

template <class... T>
void parse_line(LineReader& r, const char* what, T&... out) {
  std::istringstream ss(r.text);
  ((ss >> out), ...);
  std::string rest;
  if (ss.fail() || (ss >> rest)) r.fail(std::string("malformed ") + what);
}

}  // namespace

Mesh mesh_from_stream(std::istream& in) {
  LineReader r{in};
  Mesh m;
  r.require("header");
  {
    std::istringstream ss(r.text);
    std::string magic;
    int version = 0;
    ss >> magic >> version;
    if (magic != "ns-mesh" || version != 1) r.fail("bad header, expected 'ns-mesh 1'");
  }
  long nv = 0;
  r.require("vertex count");
  parse_line(r, "vertex count", nv);
  if (nv < 3) r.fail("vertex count must be >= 3");
  m.vertices.resize(nv);
  for (long i = 0; i < nv; ++i) {
    r.require("vertex");
    double x = 0, y = 0;
    parse_line(r, "vertex", x, y);
    m.vertices[i] = Vec2(x, y);
  }
  long nt = 0;
  r.require("triangle count");
  parse_line(r, "triangle count", nt);
  if (nt < 1) r.fail("triangle count must be >= 1");
  m.triangles.resize(nt);
  for (long i = 0; i < nt; ++i) {
    r.require("triangle");
    int a = 0, b = 0, c = 0;
    parse_line(r, "triangle", a, b, c);
    for (int v : {a, b, c})
      if (v < 0 || v >= nv) r.fail("vertex index " + std::to_string(v) + " out of range [0," + std::to_string(nv) + ")");
    m.triangles[i] = {a, b, c};
    if (!(m.signed_area(static_cast<int>(i)) > 0.0)) r.fail("triangle has zero or negative (clockwise) area");
  }
  while (r.next()) {
    std::string b;
    int va = 0, vb = 0, tag = 0;
    parse_line(r, "boundary tag", b, va, vb, tag);
    if (b != "b") r.fail("expected boundary-tag line 'b va vb tag'");
    if (va < 0 || va >= nv || vb < 0 || vb >= nv) r.fail("boundary vertex index out of range");
    m.boundary_tags.push_back({va, vb, tag});
  }
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("mesh file: ") + e.what());
  }
  return m;
}

Mesh mesh_from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mesh file " + path.string());
  return mesh_from_stream(in);
}

void write_mesh(std::ostream& out, const Mesh& mesh) {
  out << "ns-mesh 1\n" << mesh.num_vertices() << '\n' << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << '\n';
  out << mesh.num_elements() << '\n';
  for (const auto& t : mesh.triangles) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (const auto& bt : mesh.boundary_tags) out << "b " << bt.a << ' ' << bt.b << ' ' << bt.tag << '\n';
}

void write_mesh(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write mesh file " + path.string());
  write_mesh(out, mesh);
}

}  // namespace nsdg
