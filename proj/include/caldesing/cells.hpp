#pragma once

// Compact subsets of flat tori R^j / rho Z^j represented as finite unions of
// closed dyadic cells at a fixed depth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace caldesing {

inline constexpr int kMaxTorusDim = 4;
inline constexpr int kMaxCellDepth = 16;

using CellIndex = std::array<int, kMaxTorusDim>;

class DyadicCellSet {
 public:
  using Key = std::uint64_t;

  DyadicCellSet(int torus_dim, double side, int depth) : dim_(torus_dim), side_(side), depth_(depth) {
    if (torus_dim < 1 || torus_dim > kMaxTorusDim) throw std::invalid_argument("torus dimension out of range");
    if (!(side > 0.0) || !std::isfinite(side)) throw std::invalid_argument("torus side must be positive");
    if (depth < 0 || depth > kMaxCellDepth) throw std::invalid_argument("cell depth out of range");
  }

  // Indices are reduced modulo 2^depth; duplicates collapse.
  DyadicCellSet(int torus_dim, double side, int depth, const std::vector<CellIndex>& cells)
      : DyadicCellSet(torus_dim, side, depth) {
    keys_.reserve(cells.size());
    for (const auto& c : cells) keys_.push_back(pack(c));
    normalize();
  }

  static DyadicCellSet from_keys(int torus_dim, double side, int depth, std::vector<Key> keys) {
    DyadicCellSet s(torus_dim, side, depth);
    s.keys_ = std::move(keys);
    s.normalize();
    return s;
  }

  static DyadicCellSet full(int torus_dim, double side, int depth) {
    DyadicCellSet s(torus_dim, side, depth);
    const std::uint64_t total = std::uint64_t{1} << (torus_dim * depth);
    if (total > (std::uint64_t{1} << 28)) throw std::invalid_argument("full cell set too large");
    s.keys_.reserve(total);
    CellIndex idx{};
    for (std::uint64_t n = 0; n < total; ++n) {
      std::uint64_t r = n;
      for (int a = 0; a < torus_dim; ++a) {
        idx[a] = static_cast<int>(r & ((std::uint64_t{1} << depth) - 1));
        r >>= depth;
      }
      s.keys_.push_back(s.pack(idx));
    }
    s.normalize();
    return s;
  }

  int torus_dim() const noexcept { return dim_; }
  double side() const noexcept { return side_; }
  int depth() const noexcept { return depth_; }
  long long cells_per_axis() const noexcept { return 1LL << depth_; }
  double cell_side() const noexcept { return side_ / static_cast<double>(cells_per_axis()); }
  std::size_t size() const noexcept { return keys_.size(); }
  bool empty() const noexcept { return keys_.empty(); }
  bool is_full() const noexcept { return keys_.size() == (std::uint64_t{1} << (dim_ * depth_)); }
  const std::vector<Key>& keys() const noexcept { return keys_; }

  Key pack(const CellIndex& idx) const {
    Key k = 0;
    const long long n = cells_per_axis();
    for (int a = 0; a < dim_; ++a) {
      long long i = idx[a] % n;
      if (i < 0) i += n;
      k |= static_cast<Key>(i) << (16 * a);
    }
    return k;
  }

  CellIndex unpack(Key k) const {
    CellIndex idx{};
    for (int a = 0; a < dim_; ++a) idx[a] = static_cast<int>((k >> (16 * a)) & 0xffffu);
    return idx;
  }

  CellIndex cell(std::size_t i) const { return unpack(keys_[i]); }

  bool contains_cell(const CellIndex& idx) const { return std::binary_search(keys_.begin(), keys_.end(), pack(idx)); }

  // Membership of a point in the closed union of cells.
  bool contains_point(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("point dimension mismatch");
    std::array<std::array<int, 2>, kMaxTorusDim> candidates{};
    std::array<int, kMaxTorusDim> counts{};
    const double h = cell_side();
    for (int a = 0; a < dim_; ++a) {
      const double u = x[a] / h;
      const double f = std::floor(u);
      candidates[a][0] = static_cast<int>(static_cast<long long>(f) % cells_per_axis());
      counts[a] = 1;
      if (u == f) candidates[a][counts[a]++] = candidates[a][0] - 1;
    }
    int combos = 1;
    for (int a = 0; a < dim_; ++a) combos *= counts[a];
    for (int c = 0; c < combos; ++c) {
      CellIndex idx{};
      int r = c;
      for (int a = 0; a < dim_; ++a) {
        idx[a] = candidates[a][r % counts[a]];
        r /= counts[a];
      }
      if (contains_cell(idx)) return true;
    }
    return false;
  }

  std::array<double, kMaxTorusDim> cell_center(const CellIndex& idx) const {
    std::array<double, kMaxTorusDim> c{};
    for (int a = 0; a < dim_; ++a) c[a] = (idx[a] + 0.5) * cell_side();
    return c;
  }

  // Ancestor cells at a coarser depth.
  DyadicCellSet coarsened(int depth) const {
    if (depth < 0 || depth > depth_) throw std::invalid_argument("coarsening depth out of range");
    std::vector<Key> out;
    out.reserve(keys_.size());
    const int shift = depth_ - depth;
    for (Key k : keys_) {
      CellIndex idx = unpack(k);
      for (int a = 0; a < dim_; ++a) idx[a] >>= shift;
      Key p = 0;
      for (int a = 0; a < dim_; ++a) p |= static_cast<Key>(idx[a]) << (16 * a);
      out.push_back(p);
    }
    return from_keys(dim_, side_, depth, std::move(out));
  }

  friend bool operator==(const DyadicCellSet& a, const DyadicCellSet& b) {
    return a.dim_ == b.dim_ && a.side_ == b.side_ && a.depth_ == b.depth_ && a.keys_ == b.keys_;
  }

 private:
  void normalize() {
    std::sort(keys_.begin(), keys_.end());
    keys_.erase(std::unique(keys_.begin(), keys_.end()), keys_.end());
  }

  int dim_;
  double side_;
  int depth_;
  std::vector<Key> keys_;
};

// Text format: optional '#' comment lines, then one line per cell
// "d i1 ... ij" with the depth followed by the integer indices.
inline void write_cells(std::ostream& os, const DyadicCellSet& s, const std::vector<std::string>& header = {}) {
  os << "# dyadic-cells dim=" << s.torus_dim() << " side=" << s.side() << " depth=" << s.depth() << '\n';
  for (const auto& h : header) os << "# " << h << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto idx = s.cell(i);
    os << s.depth();
    for (int a = 0; a < s.torus_dim(); ++a) os << ' ' << idx[a];
    os << '\n';
  }
}

// The side is taken from the "side=" header field when present, otherwise
// from default_side. An empty set needs the header to know its shape.
inline DyadicCellSet read_cells(std::istream& is, double default_side = 1.0) {
  std::string line;
  double side = default_side;
  int dim = -1;
  int depth = -1;
  std::vector<CellIndex> cells;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') throw std::invalid_argument("cell file must use LF line endings");
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string tok;
      while (hs >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "side") side = std::stod(val);
        if (key == "dim") dim = std::stoi(val);
        if (key == "depth") depth = std::stoi(val);
      }
      continue;
    }
    std::istringstream ls(line);
    std::vector<long long> nums;
    long long v = 0;
    while (ls >> v) nums.push_back(v);
    if (!ls.eof() || nums.size() < 2)
      throw std::invalid_argument("malformed cell line " + std::to_string(lineno) + ": '" + line + "'");
    const int line_dim = static_cast<int>(nums.size()) - 1;
    if (dim < 0) dim = line_dim;
    if (depth < 0) depth = static_cast<int>(nums[0]);
    if (line_dim != dim || nums[0] != depth)
      throw std::invalid_argument("inconsistent depth or dimension at line " + std::to_string(lineno));
    CellIndex idx{};
    for (int a = 0; a < dim; ++a) {
      if (nums[a + 1] < 0 || nums[a + 1] >= (1LL << depth))
        throw std::invalid_argument("cell index out of range at line " + std::to_string(lineno));
      idx[a] = static_cast<int>(nums[a + 1]);
    }
    cells.push_back(idx);
  }
  if (dim < 0 || depth < 0) throw std::invalid_argument("cell file declares neither cells nor shape");
  return DyadicCellSet(dim, side, depth, cells);
}

namespace detail {

inline int wrapped_index_distance(int a, int b, long long n) {
  long long d = std::llabs(static_cast<long long>(a) - b) % n;
  return static_cast<int>(std::min(d, n - d));
}

}  // namespace detail

// Directed distance, in cells and the L-infinity index metric on the torus,
// from a cell to the nearest cell of s. Returns cap + 1 when nothing lies
// within cap cells.
inline int nearest_cell_distance(const DyadicCellSet& s, const CellIndex& c, int cap) {
  if (s.empty()) return cap + 1;
  const int dim = s.torus_dim();
  for (int r = 0; r <= cap; ++r) {
    // Visit the shell at L-infinity radius r.
    const int width = 2 * r + 1;
    long long total = 1;
    for (int a = 0; a < dim; ++a) total *= width;
    for (long long n = 0; n < total; ++n) {
      long long rem = n;
      CellIndex idx{};
      bool on_shell = false;
      for (int a = 0; a < dim; ++a) {
        const int off = static_cast<int>(rem % width) - r;
        rem /= width;
        if (std::abs(off) == r) on_shell = true;
        idx[a] = c[a] + off;
      }
      if (on_shell && s.contains_cell(idx)) return r;
    }
  }
  return cap + 1;
}

// Symmetric Hausdorff distance in cells between two sets on the same grid,
// saturating at cap + 1.
inline int hausdorff_cells(const DyadicCellSet& a, const DyadicCellSet& b, int cap = 8) {
  if (a.torus_dim() != b.torus_dim() || a.depth() != b.depth())
    throw std::invalid_argument("hausdorff_cells: sets live on different grids");
  if (a.empty() && b.empty()) return 0;
  if (a.empty() || b.empty()) return cap + 1;
  int worst = 0;
  for (std::size_t i = 0; i < a.size() && worst <= cap; ++i)
    worst = std::max(worst, nearest_cell_distance(b, a.cell(i), cap));
  for (std::size_t i = 0; i < b.size() && worst <= cap; ++i)
    worst = std::max(worst, nearest_cell_distance(a, b.cell(i), cap));
  return worst;
}

}  // namespace caldesing
