#pragma once

// Two-branch Cantor sets on dyadic grids, products with intervals, and
// box-counting dimension estimates.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "cells.hpp"

namespace caldesing {

struct CantorSpec {
  double ratio = 1.0 / 3.0;
  int depth = 6;
  double length = 1.0;  // the first-level interval [offset, offset + length]
  double offset = 0.0;

  void validate() const {
    if (!(ratio > 0.0 && ratio < 0.5)) throw std::invalid_argument("Cantor ratio must lie in (0, 1/2)");
    if (depth < 0) throw std::invalid_argument("Cantor depth must be non-negative");
    if (!(length > 0.0) || !std::isfinite(length)) throw std::invalid_argument("Cantor length must be positive");
    if (!(offset >= 0.0) || !std::isfinite(offset)) throw std::invalid_argument("Cantor offset must be non-negative");
  }

  double dimension() const { return std::log(2.0) / std::log(1.0 / ratio); }
  double finest_length() const { return length * std::pow(ratio, depth); }
  // Smallest gap between two construction intervals (the last level's gaps).
  double smallest_gap() const {
    if (depth == 0) return std::numeric_limits<double>::infinity();
    return length * std::pow(ratio, depth - 1) * (1.0 - 2.0 * ratio);
  }
};

inline double ratio_for_dimension(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("target dimension must lie in (0, 1)");
  return std::pow(2.0, -1.0 / alpha);
}

// Left endpoints of the 2^depth construction intervals, in increasing order.
inline std::vector<double> cantor_left_endpoints(const CantorSpec& spec) {
  spec.validate();
  std::vector<double> left{spec.offset};
  double len = spec.length;
  for (int k = 0; k < spec.depth; ++k) {
    const double next = len * spec.ratio;
    std::vector<double> out;
    out.reserve(left.size() * 2);
    for (double a : left) {
      out.push_back(a);
      out.push_back(a + len - next);
    }
    left = std::move(out);
    len = next;
  }
  return left;
}

// Smallest dyadic depth whose cells keep distinct construction intervals
// separated by at least one empty cell.
inline int cantor_grid_depth(const CantorSpec& spec, double side) {
  spec.validate();
  const double need = std::min(spec.smallest_gap() / 2.0, spec.finest_length());
  for (int d = 0; d <= kMaxCellDepth; ++d)
    if (side / static_cast<double>(1LL << d) <= need) return d;
  throw std::invalid_argument("Cantor depth too large for the dyadic grid");
}

// Depth-d approximation snapped outward to the grid of R / side Z. A grid
// depth of -1 picks cantor_grid_depth; an explicit depth that cannot separate
// the intervals is rejected.
inline DyadicCellSet cantor_generate(const CantorSpec& spec, double side = 1.0, int grid_depth = -1) {
  spec.validate();
  if (spec.offset + spec.length > side) throw std::invalid_argument("Cantor interval does not fit in the torus");
  const int needed = cantor_grid_depth(spec, side);
  if (grid_depth < 0) grid_depth = needed;
  if (grid_depth > kMaxCellDepth) throw std::invalid_argument("grid depth too large");
  if (grid_depth < needed)
    throw std::invalid_argument("grid depth " + std::to_string(grid_depth) + " cannot resolve Cantor depth " +
                                std::to_string(spec.depth) + " (needs " + std::to_string(needed) + ")");
  DyadicCellSet proto(1, side, grid_depth);
  const double h = proto.cell_side();
  const double len = spec.finest_length();
  const long long n = proto.cells_per_axis();
  std::vector<CellIndex> cells;
  for (double a : cantor_left_endpoints(spec)) {
    const long long lo = static_cast<long long>(std::floor(a / h));
    long long hi = static_cast<long long>(std::ceil((a + len) / h));
    if (hi == lo) hi = lo + 1;
    for (long long i = lo; i < hi && i < n; ++i) cells.push_back({static_cast<int>(i), 0, 0, 0});
  }
  return DyadicCellSet(1, side, grid_depth, cells);
}

namespace detail {

inline DyadicCellSet append_axes(const DyadicCellSet& s, int extra_dims, long long first, long long count) {
  const int dim = s.torus_dim() + extra_dims;
  if (extra_dims < 0 || dim > kMaxTorusDim) throw std::invalid_argument("product dimension exceeds the torus limit");
  long long total = 1;
  for (int e = 0; e < extra_dims; ++e) total *= count;
  if (static_cast<double>(total) * static_cast<double>(s.size()) > double(1 << 28))
    throw std::invalid_argument("product cell set too large");
  DyadicCellSet proto(dim, s.side(), s.depth());
  std::vector<DyadicCellSet::Key> keys;
  keys.reserve(static_cast<std::size_t>(total) * s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CellIndex idx = s.cell(i);
    for (long long t = 0; t < total; ++t) {
      long long r = t;
      for (int e = 0; e < extra_dims; ++e) {
        idx[s.torus_dim() + e] = static_cast<int>(first + r % count);
        r /= count;
      }
      keys.push_back(proto.pack(idx));
    }
  }
  return DyadicCellSet::from_keys(dim, s.side(), s.depth(), std::move(keys));
}

}  // namespace detail

// s x [0, length]^extra_dims, snapped outward; the default covers the circle.
inline DyadicCellSet product_with_interval(const DyadicCellSet& s, int extra_dims, double length = -1.0) {
  if (length < 0.0) length = s.side();
  if (length > s.side()) throw std::invalid_argument("interval longer than the torus side");
  long long count = static_cast<long long>(std::ceil(length / s.cell_side()));
  count = std::clamp(count, 1LL, s.cells_per_axis());
  return detail::append_axes(s, extra_dims, 0, count);
}

// s x {0}^extra_dims, using the closed cells at index 0.
inline DyadicCellSet product_with_point(const DyadicCellSet& s, int extra_dims) {
  return detail::append_axes(s, extra_dims, 0, 1);
}

struct BoxDimEstimate {
  std::vector<int> depths;
  std::vector<long long> counts;
  std::vector<double> log_inv_delta;
  std::vector<double> log_count;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS of the fit
  bool degenerate = false;
};

inline BoxDimEstimate box_dim(const DyadicCellSet& s, int min_depth, int max_depth) {
  if (min_depth < 0 || max_depth > s.depth() || max_depth - min_depth < 2)
    throw std::invalid_argument("box_dim needs at least 3 depths within the set's resolution");
  BoxDimEstimate est;
  for (int d = min_depth; d <= max_depth; ++d) {
    const long long count = static_cast<long long>(s.coarsened(d).size());
    est.depths.push_back(d);
    est.counts.push_back(count);
    est.log_inv_delta.push_back(d * std::log(2.0) - std::log(s.side()));
    est.log_count.push_back(count > 0 ? std::log(static_cast<double>(count)) : 0.0);
  }
  if (s.empty()) {
    est.degenerate = true;
    return est;
  }
  const double n = static_cast<double>(est.depths.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < est.depths.size(); ++i) {
    mx += est.log_inv_delta[i];
    my += est.log_count[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < est.depths.size(); ++i) {
    sxx += (est.log_inv_delta[i] - mx) * (est.log_inv_delta[i] - mx);
    sxy += (est.log_inv_delta[i] - mx) * (est.log_count[i] - my);
  }
  est.slope = sxy / sxx;
  est.intercept = my - est.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < est.depths.size(); ++i) {
    const double r = est.log_count[i] - (est.intercept + est.slope * est.log_inv_delta[i]);
    ss += r * r;
  }
  est.residual = std::sqrt(ss / n);
  return est;
}

// Finest dyadic depth whose boxes are no smaller than the finest construction
// interval; box counts beyond it measure the grid, not the set.
inline int cantor_box_depth(const CantorSpec& spec, double side) {
  return static_cast<int>(std::floor(std::log2(side / spec.finest_length()) + 1e-12));
}

// Boxes wider than a quarter of the first-level interval see only the
// interval, so the fit starts two octaves below it.
inline int cantor_box_min_depth(const CantorSpec& spec, double side) {
  return std::max(0, static_cast<int>(std::ceil(std::log2(side / spec.length) - 1e-12)) + 2);
}

inline void write_box_dim_csv(std::ostream& os, const BoxDimEstimate& est) {
  os << "depth,count,log_inv_delta,log_count\n";
  char buf[128];
  for (std::size_t i = 0; i < est.depths.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.12g,%.12g\n", est.depths[i], est.counts[i], est.log_inv_delta[i],
                  est.log_count[i]);
    os << buf;
  }
}

}  // namespace caldesing
