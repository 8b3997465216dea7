#pragma once

#include <span>
#include <vector>

#include "nsdg/space.hpp"
#include "nsdg/types.hpp"

namespace nsdg {

// Receives dense local blocks addressed by global row/column indices.
class BlockSink {
 public:
  virtual ~BlockSink() = default;
  virtual void add(std::span<const int> rows, std::span<const int> cols, const Matrix& block) = 0;
};

class TripletSink final : public BlockSink {
 public:
  void add(std::span<const int> rows, std::span<const int> cols, const Matrix& block) override;
  SparseOperator finish(int nrows, int ncols) const;

 private:
  std::vector<Triplet> triplets_;
};

// Accumulates scale * block into a matrix whose pattern already contains every target entry.
// Rows flagged in row_mask (after offset) are skipped.
class PatternSink final : public BlockSink {
 public:
  PatternSink(SparseOperator& target, int row_offset, int col_offset, double scale,
              const std::vector<char>* row_mask = nullptr);
  void add(std::span<const int> rows, std::span<const int> cols, const Matrix& block) override;

 private:
  SparseOperator& m_;
  int roff_, coff_;
  double scale_;
  const std::vector<char>* mask_;
};

// Column-wise sparsity pattern construction for block systems.
class PatternBuilder {
 public:
  PatternBuilder(int rows, int cols);
  // Couples rows_space dofs of element e with cols_space dofs of e (and of face neighbours if requested).
  void add_space_block(const FunctionSpace& rows_space, int row_offset, const FunctionSpace& cols_space,
                       int col_offset, bool face_neighbours);
  void add_pattern(const SparseOperator& src, int row_offset, int col_offset, bool transpose = false);
  void add(int row, int col);
  void add_diagonal(int begin, int end);
  SparseOperator build();

 private:
  int rows_, cols_;
  std::vector<std::vector<int>> columns_;
};

// target(roff + i, coff + j) += scale * src(i, j) (or src(j, i) when transposed); pattern must contain entries.
void add_into(SparseOperator& target, const SparseOperator& src, int row_offset, int col_offset, double scale,
              bool transpose = false, const std::vector<char>* row_mask = nullptr);
// Pointer to the stored value at (row, col); throws when the entry is not in the pattern.
double& pattern_entry(SparseOperator& target, int row, int col);

}  // namespace nsdg

namespace nsdg {

// Column order for saddle-point systems laid out as `stages` blocks of [V dofs, Q dofs, multiplier], each of
// length `stride`: elements in nested-dissection order (recursive coordinate bisection of centroids, separator
// elements last), per element the velocity dofs then the pressure dofs of every stage, multipliers last.
std::vector<int> element_block_ordering(const FunctionSpace& V, const FunctionSpace& Q, int stages, int stride);

}  // namespace nsdg
