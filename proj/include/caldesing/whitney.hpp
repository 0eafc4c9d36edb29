#pragma once

// Smooth nonnegative functions on R^j / rho Z^j vanishing exactly on a
// dyadic compact set K: a Whitney cover of the complement of K carrying
// damped bumps exp(-1/(1-|u|^2)).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <queue>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "cells.hpp"
#include "detail/parallel.hpp"

namespace caldesing {

using MultiIndex = std::array<int, kMaxTorusDim>;

inline int order_of(const MultiIndex& a) { return a[0] + a[1] + a[2] + a[3]; }

// All multi-indices in j variables with |alpha| <= order, graded by order.
inline std::vector<MultiIndex> multi_indices(int j, int order) {
  std::vector<MultiIndex> out;
  for (int k = 0; k <= order; ++k) {
    MultiIndex a{};
    // Compositions of k into j parts, in lexicographic order from a[0] = k.
    std::vector<MultiIndex> level;
    auto rec = [&](auto&& self, int axis, int left) -> void {
      if (axis == j - 1) {
        a[axis] = left;
        level.push_back(a);
        a[axis] = 0;
        return;
      }
      for (int v = left; v >= 0; --v) {
        a[axis] = v;
        self(self, axis + 1, left - v);
      }
      a[axis] = 0;
    };
    rec(rec, 0, k);
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

namespace detail {

inline constexpr int kMaxBumpOrder = 12;

// psi(s) = exp(-1/(1-s)) on s = |u|^2; psi^(b) = psi * P_b(y), y = 1/(1-s),
// with P_0 = 1 and P_{b+1} = y^2 (P_b' - P_b).
inline const std::vector<std::vector<double>>& radial_polynomials() {
  static const std::vector<std::vector<double>> table = [] {
    std::vector<std::vector<double>> p(kMaxBumpOrder + 1);
    p[0] = {1.0};
    for (int b = 0; b < kMaxBumpOrder; ++b) {
      std::vector<double> next(p[b].size() + 2, 0.0);
      for (std::size_t i = 0; i < p[b].size(); ++i) {
        next[i + 2] -= p[b][i];
        if (i > 0) next[i + 1] += static_cast<double>(i) * p[b][i];
      }
      p[b + 1] = std::move(next);
    }
    return p;
  }();
  return table;
}

// Fills out[b] = psi^(b)(s) for b = 0..order.
inline void radial_derivatives(double s, int order, double* out) {
  if (order > kMaxBumpOrder) throw std::invalid_argument("bump derivative order too large");
  if (!(s < 1.0)) {
    std::fill(out, out + order + 1, 0.0);
    return;
  }
  const double y = 1.0 / (1.0 - s);
  if (y > 700.0) {
    std::fill(out, out + order + 1, 0.0);
    return;
  }
  const double psi = std::exp(-y);
  const auto& poly = radial_polynomials();
  for (int b = 0; b <= order; ++b) {
    double acc = 0.0;
    for (std::size_t i = poly[b].size(); i-- > 0;) acc = acc * y + poly[b][i];
    out[b] = psi * acc;
  }
}

inline double factorial(int n) {
  double r = 1.0;
  for (int i = 2; i <= n; ++i) r *= i;
  return r;
}

// Derivative d^alpha of exp(-1/(1-|u|^2)) from the radial derivatives psi.
// Each derivative lands on |u|^2 either alone (factor 2 u_a) or in a
// same-axis pair (factor 2).
inline double bump_partial(const double* u, int j, const MultiIndex& alpha, const double* psi) {
  std::array<int, kMaxTorusDim> pairs{};
  double total = 0.0;
  while (true) {
    int b = 0;
    double term = 1.0;
    for (int a = 0; a < j; ++a) {
      const int single = alpha[a] - 2 * pairs[a];
      b += alpha[a] - pairs[a];
      term *= factorial(alpha[a]) / (factorial(pairs[a]) * std::ldexp(1.0, pairs[a]) * factorial(single));
      for (int e = 0; e < single; ++e) term *= u[a];
    }
    total += term * std::ldexp(1.0, b) * psi[b];
    int a = 0;
    while (a < j) {
      if (2 * (pairs[a] + 1) <= alpha[a]) {
        ++pairs[a];
        break;
      }
      pairs[a] = 0;
      ++a;
    }
    if (a == j) break;
  }
  return total;
}

// Upper bounds B_k >= sup_u |d^alpha bump(u)| over |alpha| = k. The same
// pairing expansion is bounded term by term with |prod u_a| <= |u|^singles,
// and sup_s |psi^(b)(s)| s^(singles/2) is taken from a dense 1D sweep with a
// 5% margin.
inline std::vector<double> bump_derivative_bounds(int j, int order) {
  const int samples = 200000;
  std::vector<std::vector<double>> m(order + 1, std::vector<double>(order + 1, 0.0));
  std::vector<double> psi(order + 1);
  for (int i = 0; i < samples; ++i) {
    const double s = static_cast<double>(i) / samples;
    radial_derivatives(s, order, psi.data());
    for (int b = 0; b <= order; ++b)
      for (int e = 0; e <= order; ++e) m[b][e] = std::max(m[b][e], std::abs(psi[b]) * std::pow(s, 0.5 * e));
  }
  std::vector<double> bounds(order + 1, 0.0);
  for (const auto& alpha : multi_indices(j, order)) {
    std::array<int, kMaxTorusDim> pairs{};
    double total = 0.0;
    while (true) {
      int b = 0, singles = 0;
      double coeff = 1.0;
      for (int a = 0; a < j; ++a) {
        const int single = alpha[a] - 2 * pairs[a];
        b += alpha[a] - pairs[a];
        singles += single;
        coeff *= factorial(alpha[a]) / (factorial(pairs[a]) * std::ldexp(1.0, pairs[a]) * factorial(single));
      }
      total += coeff * std::ldexp(1.0, b) * m[b][singles];
      int a = 0;
      while (a < j) {
        if (2 * (pairs[a] + 1) <= alpha[a]) {
          ++pairs[a];
          break;
        }
        pairs[a] = 0;
        ++a;
      }
      if (a == j) break;
    }
    const int k = order_of(alpha);
    bounds[k] = std::max(bounds[k], 1.05 * total);
  }
  return bounds;
}

// Gap between closed intervals [a1, a1 + l1] and [a2, a2 + l2] on Z / n Z.
inline long long circle_gap(long long a1, long long l1, long long a2, long long l2, long long n) {
  long long x = (a2 - a1) % n;
  if (x < 0) x += n;
  if (x <= l1 || x + l2 >= n) return 0;
  return std::min(x - l1, n - x - l2);
}

// Occupancy pyramid of K used for exact box-to-set distances.
class CellHierarchy {
 public:
  explicit CellHierarchy(const DyadicCellSet& k) : k_(k) {
    const int depth = k.depth();
    levels_.resize(depth + 1);
    full_.resize(depth + 1);
    levels_[depth] = k.keys();
    full_[depth] = k.keys();
    const int kids = 1 << k.torus_dim();
    for (int d = depth - 1; d >= 0; --d) {
      levels_[d] = k.coarsened(d).keys();
      DyadicCellSet coarse(k.torus_dim(), k.side(), d);
      DyadicCellSet fine(k.torus_dim(), k.side(), d + 1);
      for (auto key : levels_[d]) {
        const CellIndex idx = coarse.unpack(key);
        bool all = true;
        for (int c = 0; c < kids && all; ++c) {
          CellIndex child{};
          for (int a = 0; a < k.torus_dim(); ++a) child[a] = 2 * idx[a] + ((c >> a) & 1);
          all = std::binary_search(full_[d + 1].begin(), full_[d + 1].end(), fine.pack(child));
        }
        if (all) full_[d].push_back(key);
      }
    }
  }

  // True when the closed cube of generation gen lies inside K.
  bool inside(int gen, const CellIndex& idx) const {
    const int dim = k_.torus_dim();
    CellIndex at{};
    int d = gen;
    for (int a = 0; a < dim; ++a) at[a] = idx[a];
    if (gen > k_.depth()) {
      for (int a = 0; a < dim; ++a) at[a] = idx[a] >> (gen - k_.depth());
      d = k_.depth();
    }
    DyadicCellSet grid(dim, k_.side(), d);
    return std::binary_search(full_[d].begin(), full_[d].end(), grid.pack(at));
  }

  // Euclidean distance on the torus from the closed cube (gen, idx) to K.
  double distance(int gen, const CellIndex& idx) const {
    if (k_.empty()) return std::numeric_limits<double>::infinity();
    const int dim = k_.torus_dim();
    struct Node {
      long long gap2;
      int depth;
      CellIndex idx;
      bool operator>(const Node& o) const { return gap2 > o.gap2; }
    };
    const int fine = std::max(gen, k_.depth());
    const long long n = 1LL << fine;
    auto gap2 = [&](int depth, const CellIndex& c) {
      long long total = 0;
      for (int a = 0; a < dim; ++a) {
        const long long l1 = 1LL << (fine - gen);
        const long long l2 = 1LL << (fine - depth);
        const long long g = circle_gap(static_cast<long long>(idx[a]) * l1, l1, static_cast<long long>(c[a]) * l2, l2, n);
        total += g * g;
      }
      return total;
    };
    std::priority_queue<Node, std::vector<Node>, std::greater<>> open;
    open.push({gap2(0, CellIndex{}), 0, CellIndex{}});
    const int kids = 1 << dim;
    while (!open.empty()) {
      const Node top = open.top();
      open.pop();
      if (top.depth == k_.depth()) {
        const double unit = k_.side() / static_cast<double>(n);
        return std::sqrt(static_cast<double>(top.gap2)) * unit;
      }
      DyadicCellSet grid(dim, k_.side(), top.depth + 1);
      const auto& level = levels_[top.depth + 1];
      for (int c = 0; c < kids; ++c) {
        CellIndex child{};
        for (int a = 0; a < dim; ++a) child[a] = 2 * top.idx[a] + ((c >> a) & 1);
        if (std::binary_search(level.begin(), level.end(), grid.pack(child)))
          open.push({gap2(top.depth + 1, child), top.depth + 1, child});
      }
    }
    return std::numeric_limits<double>::infinity();
  }

 private:
  const DyadicCellSet& k_;
  std::vector<std::vector<DyadicCellSet::Key>> levels_;
  std::vector<std::vector<DyadicCellSet::Key>> full_;
};

}  // namespace detail

struct WhitneyCube {
  int generation = 0;
  CellIndex index{};
  std::array<double, kMaxTorusDim> center{};
  double side = 0.0;
  double distance = 0.0;  // to K; infinite when K is empty
};

// Cubes of the torus complement of K. Each cube Q of side s carries the bump
// supported in the ball of radius support_ratio * s about its center.
//   2 s <= dist(Q, K) < (4 + 2 sqrt(j)) s   (first generation: lower bound only)
// and no point lies in more than overlap_bound supports.
struct WhitneyCover {
  int torus_dim = 1;
  double torus_side = 1.0;
  int set_depth = 0;
  int first_generation = 2;
  int last_generation = 2;
  double support_ratio = 0.75;
  double lower_ratio = 2.0;
  double upper_ratio = 6.0;
  int overlap_bound = 0;
  std::vector<WhitneyCube> cubes;

  // Supports of one generation hitting a point, per axis.
  int per_axis_overlap() const {
    return static_cast<int>(std::floor(2.0 * support_ratio * std::sqrt(double(torus_dim)))) + 1;
  }
};

inline WhitneyCover whitney_cover(const DyadicCellSet& k) {
  WhitneyCover cover;
  const int j = k.torus_dim();
  cover.torus_dim = j;
  cover.torus_side = k.side();
  cover.set_depth = k.depth();
  cover.first_generation = 2;
  cover.last_generation = k.depth() + 3;
  cover.support_ratio = 0.75 * std::sqrt(double(j));
  cover.lower_ratio = 2.0;
  cover.upper_ratio = 4.0 + 2.0 * std::sqrt(double(j));
  if (cover.last_generation * j > 64) throw std::invalid_argument("set depth too fine for this torus dimension");
  {
    // A point at distance delta from K meets supports only of sides in
    // [delta / (upper + support - 1/2), delta / (lower - support + 1/2)].
    const double r = 0.75 * std::sqrt(double(j));
    const double lo_den = cover.lower_ratio - (r - 0.5);
    const double spread = (cover.upper_ratio + r) / lo_den;
    const int gens = static_cast<int>(std::floor(std::log2(spread))) + 1;
    int per_gen = 1;
    for (int a = 0; a < j; ++a) per_gen *= cover.per_axis_overlap();
    cover.overlap_bound = per_gen * (gens + 1);
  }
  detail::CellHierarchy tree(k);
  std::vector<std::pair<int, CellIndex>> stack;
  const int first = cover.first_generation;
  const int per_axis = 1 << first;
  int total = 1;
  for (int a = 0; a < j; ++a) total *= per_axis;
  for (int n = total - 1; n >= 0; --n) {
    CellIndex idx{};
    int r = n;
    for (int a = 0; a < j; ++a) {
      idx[a] = r % per_axis;
      r /= per_axis;
    }
    stack.emplace_back(first, idx);
  }
  while (!stack.empty()) {
    auto [gen, idx] = stack.back();
    stack.pop_back();
    if (!k.empty() && tree.inside(gen, idx)) continue;
    const double s = k.side() / static_cast<double>(1LL << gen);
    const double dist = tree.distance(gen, idx);
    if (dist >= 2.0 * s) {
      WhitneyCube q;
      q.generation = gen;
      q.index = idx;
      q.side = s;
      q.distance = dist;
      for (int a = 0; a < j; ++a) q.center[a] = (idx[a] + 0.5) * s;
      cover.cubes.push_back(q);
      continue;
    }
    if (gen >= cover.last_generation) continue;
    for (int c = (1 << j) - 1; c >= 0; --c) {
      CellIndex child{};
      for (int a = 0; a < j; ++a) child[a] = 2 * idx[a] + ((c >> a) & 1);
      stack.emplace_back(gen + 1, child);
    }
  }
  std::sort(cover.cubes.begin(), cover.cubes.end(), [](const WhitneyCube& a, const WhitneyCube& b) {
    if (a.generation != b.generation) return a.generation < b.generation;
    return a.index < b.index;
  });
  return cover;
}

// f = sum_Q c_Q bump((p - center_Q) / r_Q). Immutable once built.
class SmoothFunction {
 public:
  SmoothFunction(std::shared_ptr<const WhitneyCover> cover, std::vector<double> coefficients, int order)
      : cover_(std::move(cover)), coeffs_(std::move(coefficients)), order_(order) {
    if (!cover_) throw std::invalid_argument("missing cover");
    if (coeffs_.size() != cover_->cubes.size()) throw std::invalid_argument("one coefficient per cube required");
    if (order < 0 || order > detail::kMaxBumpOrder) throw std::invalid_argument("order out of range");
    const int j = cover_->torus_dim;
    bits_ = 64 / j;
    gens_.assign(cover_->last_generation + 1, {});
    for (std::size_t i = 0; i < cover_->cubes.size(); ++i) {
      const auto& q = cover_->cubes[i];
      gens_[q.generation].emplace(pack(q.index), static_cast<int>(i));
    }
  }

  const WhitneyCover& cover() const noexcept { return *cover_; }
  const std::vector<double>& coefficients() const noexcept { return coeffs_; }
  int order() const noexcept { return order_; }
  int torus_dim() const noexcept { return cover_->torus_dim; }
  double torus_side() const noexcept { return cover_->torus_side; }
  bool identically_zero() const noexcept { return cover_->cubes.empty(); }

  SmoothFunction with_coefficients(std::vector<double> coefficients) const {
    return SmoothFunction(cover_, std::move(coefficients), order_);
  }

  SmoothFunction scaled(double factor) const {
    std::vector<double> c = coeffs_;
    for (double& v : c) v *= factor;
    return with_coefficients(std::move(c));
  }

  double value(std::span<const double> p) const { return derivative(p, MultiIndex{}); }

  double derivative(std::span<const double> p, const MultiIndex& alpha) const {
    check_point(p);
    const int k = order_of(alpha);
    if (k > order_) throw std::invalid_argument("derivative order exceeds the function's order");
    for (int a = torus_dim(); a < kMaxTorusDim; ++a)
      if (alpha[a] != 0) throw std::invalid_argument("multi-index uses axes beyond the torus dimension");
    double total = 0.0;
    std::array<double, detail::kMaxBumpOrder + 1> psi{};
    visit(p, [&](int cube, const double* u, double r) {
      detail::radial_derivatives(squared(u), k, psi.data());
      total += coeffs_[cube] * std::pow(r, -k) * detail::bump_partial(u, torus_dim(), alpha, psi.data());
    });
    return total;
  }

  // All derivatives with |alpha| <= order, indexed like multi_indices(j, order).
  std::vector<double> jet(std::span<const double> p, int order) const {
    check_point(p);
    if (order > order_) throw std::invalid_argument("jet order exceeds the function's order");
    const auto alphas = multi_indices(torus_dim(), order);
    std::vector<double> out(alphas.size(), 0.0);
    std::array<double, detail::kMaxBumpOrder + 1> psi{};
    visit(p, [&](int cube, const double* u, double r) {
      detail::radial_derivatives(squared(u), order, psi.data());
      for (std::size_t i = 0; i < alphas.size(); ++i)
        out[i] += coeffs_[cube] * std::pow(r, -order_of(alphas[i])) *
                  detail::bump_partial(u, torus_dim(), alphas[i], psi.data());
    });
    return out;
  }

 private:
  static double squared(const double* u) { return u[0] * u[0] + u[1] * u[1] + u[2] * u[2] + u[3] * u[3]; }

  void check_point(std::span<const double> p) const {
    if (static_cast<int>(p.size()) != torus_dim()) throw std::invalid_argument("point dimension mismatch");
  }

  std::uint64_t pack(const CellIndex& idx) const {
    std::uint64_t key = 0;
    for (int a = 0; a < torus_dim(); ++a) key |= static_cast<std::uint64_t>(idx[a]) << (bits_ * a);
    return key;
  }

  // Calls fn(cube, u, r) for every cube whose open support contains p, with
  // u = (p - center) / r in the minimum image.
  template <class Fn>
  void visit(std::span<const double> p, Fn&& fn) const {
    const int j = torus_dim();
    const double rho = torus_side();
    std::array<double, kMaxTorusDim> x{};
    for (int a = 0; a < j; ++a) {
      x[a] = std::fmod(p[a], rho);
      if (x[a] < 0) x[a] += rho;
    }
    int combos = 1;
    for (int a = 0; a < j; ++a) combos *= 3;
    for (int gen = cover_->first_generation; gen < static_cast<int>(gens_.size()); ++gen) {
      const auto& table = gens_[gen];
      if (table.empty()) continue;
      const long long n = 1LL << gen;
      const double s = rho / static_cast<double>(n);
      const double r = cover_->support_ratio * s;
      std::array<long long, kMaxTorusDim> base{};
      for (int a = 0; a < j; ++a) base[a] = std::min(static_cast<long long>(std::floor(x[a] / s)), n - 1);
      for (int c = 0; c < combos; ++c) {
        CellIndex idx{};
        int rem = c;
        for (int a = 0; a < j; ++a) {
          long long i = (base[a] + rem % 3 - 1) % n;
          if (i < 0) i += n;
          idx[a] = static_cast<int>(i);
          rem /= 3;
        }
        const auto it = table.find(pack(idx));
        if (it == table.end()) continue;
        const auto& q = cover_->cubes[it->second];
        std::array<double, kMaxTorusDim> u{};
        double q2 = 0.0;
        for (int a = 0; a < j; ++a) {
          double d = x[a] - q.center[a];
          d -= rho * std::round(d / rho);
          u[a] = d / r;
          q2 += u[a] * u[a];
        }
        if (q2 < 1.0) fn(it->second, u.data(), r);
      }
    }
  }

  std::shared_ptr<const WhitneyCover> cover_;
  std::vector<double> coeffs_;
  int order_;
  int bits_ = 64;
  std::vector<std::unordered_map<std::uint64_t, int>> gens_;
};

// Rigorous bound on the C^L norm of sum_Q s^(L+1) 4^(-gen) bump_Q: per
// generation, at most per_gen supports meet a point, each bounded by
// max_k B_k r^-k times its weight.
inline double whitney_norm_bound(const WhitneyCover& cover, int order) {
  if (cover.cubes.empty()) return 0.0;
  const auto b = detail::bump_derivative_bounds(cover.torus_dim, order);
  int per_gen = 1;
  for (int a = 0; a < cover.torus_dim; ++a) per_gen *= cover.per_axis_overlap();
  double total = 0.0;
  for (int gen = cover.first_generation; gen <= cover.last_generation; ++gen) {
    const bool present = std::any_of(cover.cubes.begin(), cover.cubes.end(),
                                     [gen](const WhitneyCube& q) { return q.generation == gen; });
    if (!present) continue;
    const double s = cover.torus_side / static_cast<double>(1LL << gen);
    const double r = cover.support_ratio * s;
    const double weight = std::pow(s, order + 1) * std::pow(4.0, -gen);
    double worst = 0.0;
    for (int k = 0; k <= order; ++k) worst = std::max(worst, b[k] * std::pow(r, -k));
    total += per_gen * weight * worst;
  }
  return total;
}

// f >= 0 with f = 0 exactly on K and off it only within a quarter cell of K;
// ||f||_{C^L} <= epsilon by the global rescale of the damped coefficients.
inline SmoothFunction build_vanishing_function(const DyadicCellSet& k, double epsilon, int order) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be positive");
  if (order < 0 || order > detail::kMaxBumpOrder) throw std::invalid_argument("order out of range");
  auto cover = std::make_shared<const WhitneyCover>(whitney_cover(k));
  const double bound = whitney_norm_bound(*cover, order);
  const double eps0 = bound > 0.0 ? epsilon / bound : 0.0;
  std::vector<double> coeffs;
  coeffs.reserve(cover->cubes.size());
  for (const auto& q : cover->cubes) coeffs.push_back(eps0 * std::pow(q.side, order + 1) * std::pow(4.0, -q.generation));
  return SmoothFunction(std::move(cover), std::move(coeffs), order);
}

// Sampled C^order norm: max of |d^alpha f| over the vertices of the dyadic
// grid at grid_depth. A lower bound for the true norm.
inline double ck_norm(const SmoothFunction& f, int order, int grid_depth, int threads = 1) {
  if (order > f.order()) throw std::invalid_argument("order exceeds the function's order");
  if (f.identically_zero()) return 0.0;
  const int j = f.torus_dim();
  const long long n = 1LL << grid_depth;
  long long total = 1;
  for (int a = 0; a < j; ++a) total *= n;
  const double h = f.torus_side() / static_cast<double>(n);
  std::vector<double> best(static_cast<std::size_t>(total), 0.0);
  detail::parallel_for(static_cast<std::size_t>(total), threads, [&](std::size_t i) {
    std::array<double, kMaxTorusDim> p{};
    long long r = static_cast<long long>(i);
    for (int a = 0; a < j; ++a) {
      p[a] = static_cast<double>(r % n) * h;
      r /= n;
    }
    double m = 0.0;
    for (double v : f.jet(std::span<const double>(p.data(), j), order)) m = std::max(m, std::abs(v));
    best[i] = m;
  });
  return *std::max_element(best.begin(), best.end());
}

// Cells of the grid at the given depth whose centers satisfy |f| <= threshold.
inline DyadicCellSet zero_set(const SmoothFunction& f, int depth, double threshold = 0.0) {
  const int j = f.torus_dim();
  DyadicCellSet proto(j, f.torus_side(), depth);
  const long long n = proto.cells_per_axis();
  long long total = 1;
  for (int a = 0; a < j; ++a) total *= n;
  std::vector<DyadicCellSet::Key> keys;
  for (long long i = 0; i < total; ++i) {
    CellIndex idx{};
    long long r = i;
    for (int a = 0; a < j; ++a) {
      idx[a] = static_cast<int>(r % n);
      r /= n;
    }
    const auto c = proto.cell_center(idx);
    if (std::abs(f.value(std::span<const double>(c.data(), j))) <= threshold) keys.push_back(proto.pack(idx));
  }
  return DyadicCellSet::from_keys(j, f.torus_side(), depth, std::move(keys));
}

}  // namespace caldesing
