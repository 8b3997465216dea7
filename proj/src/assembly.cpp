#include "nsdg/assembly.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace nsdg {

void TripletSink::add(std::span<const int> rows, std::span<const int> cols, const Matrix& block) {
  for (Eigen::Index j = 0; j < block.cols(); ++j)
    for (Eigen::Index i = 0; i < block.rows(); ++i)
      if (block(i, j) != 0.0) triplets_.emplace_back(rows[i], cols[j], block(i, j));
}

SparseOperator TripletSink::finish(int nrows, int ncols) const {
  SparseOperator m(nrows, ncols);
  m.setFromTriplets(triplets_.begin(), triplets_.end());
  m.makeCompressed();
  return m;
}

PatternSink::PatternSink(SparseOperator& target, int row_offset, int col_offset, double scale,
                         const std::vector<char>* row_mask)
    : m_(target), roff_(row_offset), coff_(col_offset), scale_(scale), mask_(row_mask) {
  if (!m_.isCompressed()) m_.makeCompressed();
}

void PatternSink::add(std::span<const int> rows, std::span<const int> cols, const Matrix& block) {
  const int* outer = m_.outerIndexPtr();
  const int* inner = m_.innerIndexPtr();
  double* val = m_.valuePtr();
  const auto n = rows.size();
  bool contiguous = true;
  for (std::size_t i = 1; i < n && contiguous; ++i) contiguous = rows[i] == rows[i - 1] + 1;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const int c = cols[j] + coff_;
    const int* begin = inner + outer[c];
    const int* end = inner + outer[c + 1];
    if (contiguous) {
      const int* p = std::lower_bound(begin, end, rows[0] + roff_);
      for (std::size_t i = 0; i < n; ++i, ++p) {
        const int r = rows[i] + roff_;
        if (p >= end || *p != r) throw std::logic_error("PatternSink: entry outside pattern");
        if (mask_ && (*mask_)[r]) continue;
        val[p - inner] += scale_ * block(i, j);
      }
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const int r = rows[i] + roff_;
        if (mask_ && (*mask_)[r]) continue;
        const int* p = std::lower_bound(begin, end, r);
        if (p == end || *p != r) throw std::logic_error("PatternSink: entry outside pattern");
        val[p - inner] += scale_ * block(i, j);
      }
    }
  }
}

PatternBuilder::PatternBuilder(int rows, int cols) : rows_(rows), cols_(cols), columns_(cols) {}

void PatternBuilder::add_space_block(const FunctionSpace& rs, int roff, const FunctionSpace& cs, int coff,
                                     bool face_neighbours) {
  const auto& topo = rs.topology();
  auto couple = [&](int er, int ec) {
    const auto rd = rs.element_dofs(er);
    for (int c : cs.element_dofs(ec)) {
      auto& col = columns_[c + coff];
      for (int r : rd) col.push_back(r + roff);
    }
  };
  for (int e = 0; e < rs.mesh().num_elements(); ++e) couple(e, e);
  if (face_neighbours)
    for (const auto& f : topo.faces)
      if (!f.boundary()) {
        couple(f.plus, f.minus);
        couple(f.minus, f.plus);
      }
}

void PatternBuilder::add_pattern(const SparseOperator& src, int roff, int coff, bool transpose) {
  for (int j = 0; j < src.outerSize(); ++j)
    for (SparseOperator::InnerIterator it(src, j); it; ++it) {
      if (transpose)
        columns_[it.row() + coff].push_back(j + roff);
      else
        columns_[j + coff].push_back(static_cast<int>(it.row()) + roff);
    }
}

void PatternBuilder::add(int row, int col) { columns_.at(col).push_back(row); }

void PatternBuilder::add_diagonal(int begin, int end) {
  for (int i = begin; i < end; ++i) columns_.at(i).push_back(i);
}

SparseOperator PatternBuilder::build() {
  std::vector<int> outer(cols_ + 1, 0);
  for (int j = 0; j < cols_; ++j) {
    auto& col = columns_[j];
    std::sort(col.begin(), col.end());
    col.erase(std::unique(col.begin(), col.end()), col.end());
    if (!col.empty() && (col.front() < 0 || col.back() >= rows_))
      throw std::logic_error("PatternBuilder: row index out of range");
    outer[j + 1] = outer[j] + static_cast<int>(col.size());
  }
  SparseOperator m(rows_, cols_);
  m.resizeNonZeros(outer[cols_]);
  std::copy(outer.begin(), outer.end(), m.outerIndexPtr());
  int* inner = m.innerIndexPtr();
  for (int j = 0; j < cols_; ++j) {
    std::copy(columns_[j].begin(), columns_[j].end(), inner + outer[j]);
    std::vector<int>().swap(columns_[j]);
  }
  std::fill(m.valuePtr(), m.valuePtr() + outer[cols_], 0.0);
  return m;
}

double& pattern_entry(SparseOperator& target, int row, int col) {
  const int* inner = target.innerIndexPtr();
  const int* begin = inner + target.outerIndexPtr()[col];
  const int* end = inner + target.outerIndexPtr()[col + 1];
  const int* p = std::lower_bound(begin, end, row);
  if (p == end || *p != row) throw std::logic_error("pattern_entry: entry outside pattern");
  return target.valuePtr()[p - inner];
}

void add_into(SparseOperator& target, const SparseOperator& src, int roff, int coff, double scale, bool transpose,
              const std::vector<char>* row_mask) {
  for (int j = 0; j < src.outerSize(); ++j) {
    if (!transpose) {
      // Merge walk: both columns are sorted.
      const int c = j + coff;
      const int* inner = target.innerIndexPtr();
      const int* p = inner + target.outerIndexPtr()[c];
      const int* end = inner + target.outerIndexPtr()[c + 1];
      for (SparseOperator::InnerIterator it(src, j); it; ++it) {
        const int r = static_cast<int>(it.row()) + roff;
        while (p < end && *p < r) ++p;
        if (p == end || *p != r) throw std::logic_error("add_into: entry outside pattern");
        if (row_mask && (*row_mask)[r]) continue;
        target.valuePtr()[p - inner] += scale * it.value();
      }
    } else {
      for (SparseOperator::InnerIterator it(src, j); it; ++it) {
        const int r = j + roff;
        if (row_mask && (*row_mask)[r]) continue;
        pattern_entry(target, r, static_cast<int>(it.row()) + coff) += scale * it.value();
      }
    }
  }
}

}  // namespace nsdg

namespace nsdg {

namespace {

// Nested dissection of the element face graph by recursive coordinate bisection.
// Each part is split at the median centroid along its longer extent; the elements of the lower half that
// touch the upper half form the separator and are ordered last.
void dissect(std::vector<int>& elems, const std::vector<Vec2>& centroid, const std::vector<std::vector<int>>& nbr,
             std::vector<int>& part, int& next_part, std::vector<int>& out) {
  constexpr std::size_t kLeaf = 16;
  if (elems.size() <= kLeaf) {
    out.insert(out.end(), elems.begin(), elems.end());
    return;
  }
  Vec2 lo = centroid[elems[0]], hi = lo;
  for (int e : elems) lo = lo.cwiseMin(centroid[e]), hi = hi.cwiseMax(centroid[e]);
  const int axis = (hi[0] - lo[0]) >= (hi[1] - lo[1]) ? 0 : 1;
  const auto mid = elems.begin() + static_cast<std::ptrdiff_t>(elems.size() / 2);
  std::nth_element(elems.begin(), mid, elems.end(), [&](int a, int b) {
    const double ca = centroid[a][axis], cb = centroid[b][axis];
    return ca != cb ? ca < cb : a < b;
  });
  std::vector<int> a(elems.begin(), mid), b(mid, elems.end());
  const int pa = next_part++, pb = next_part++;
  for (int e : a) part[e] = pa;
  for (int e : b) part[e] = pb;
  std::vector<int> a_inner, sep;
  for (int e : a) {
    bool touches = false;
    for (int n : nbr[e]) touches = touches || part[n] == pb;
    (touches ? sep : a_inner).push_back(e);
  }
  elems.clear();
  elems.shrink_to_fit();
  dissect(a_inner, centroid, nbr, part, next_part, out);
  dissect(b, centroid, nbr, part, next_part, out);
  out.insert(out.end(), sep.begin(), sep.end());
}

}  // namespace

std::vector<int> element_block_ordering(const FunctionSpace& V, const FunctionSpace& Q, int stages, int stride) {
  const auto& mesh = V.mesh();
  const int ne = mesh.num_elements();
  const int nv = V.num_dofs(), nq = Q.num_dofs();
  if (stride < nv + nq) throw std::invalid_argument("element_block_ordering: stride too small");

  std::vector<std::vector<int>> nbr(ne);
  for (const auto& f : V.topology().faces) {
    if (f.boundary()) continue;
    nbr[f.plus].push_back(f.minus);
    nbr[f.minus].push_back(f.plus);
  }
  std::vector<Vec2> centroid(ne);
  for (int e = 0; e < ne; ++e) {
    const auto& t = mesh.triangles[e];
    centroid[e] = (mesh.vertices[t[0]] + mesh.vertices[t[1]] + mesh.vertices[t[2]]) / 3.0;
  }
  std::vector<int> elems(ne), part(ne, 0), elem_order;
  std::iota(elems.begin(), elems.end(), 0);
  elem_order.reserve(ne);
  int next_part = 1;
  dissect(elems, centroid, nbr, part, next_part, elem_order);

  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(stages) * stride);
  std::vector<char> seen_v(nv, 0), seen_q(nq, 0);
  for (int k = 0; k < ne; ++k) {
    const int e = elem_order[k];
    std::vector<int> vd, qd;
    for (int d : V.element_dofs(e))
      if (!seen_v[d]) seen_v[d] = 1, vd.push_back(d);
    for (int d : Q.element_dofs(e))
      if (!seen_q[d]) seen_q[d] = 1, qd.push_back(d);
    for (int s = 0; s < stages; ++s)
      for (int d : vd) order.push_back(s * stride + d);
    for (int s = 0; s < stages; ++s)
      for (int d : qd) order.push_back(s * stride + nv + d);
  }
  for (int s = 0; s < stages; ++s)
    for (int i = nv + nq; i < stride; ++i) order.push_back(s * stride + i);
  if (static_cast<int>(order.size()) != stages * stride)
    throw std::logic_error("element_block_ordering: dofs not covered by elements");
  return order;
}

}  // namespace nsdg
