#pragma once

// Exterior algebra on flat coordinate spaces R^m: dense k-vectors and
// k-forms over sorted index tuples, wedge and interior products, pullbacks,
// diagonal metrics, and orthonormal frames.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "caldesing/error.hpp"

namespace caldesing {

inline constexpr int kMaxAmbientDim = 12;

namespace detail {

inline long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// k-subsets of {0..m-1} as bitmasks, listed in lexicographic order of the
// increasing index tuple, plus the inverse map mask -> position.
struct SubsetTable {
  std::vector<std::vector<std::vector<std::uint32_t>>> masks;
  std::vector<std::vector<int>> position;

  SubsetTable() : masks(kMaxAmbientDim + 1), position(kMaxAmbientDim + 1) {
    for (int m = 0; m <= kMaxAmbientDim; ++m) {
      masks[m].resize(m + 1);
      position[m].assign(std::size_t{1} << m, -1);
      for (int k = 0; k <= m; ++k) {
        std::vector<int> idx(k);
        for (int i = 0; i < k; ++i) idx[i] = i;
        while (true) {
          std::uint32_t mask = 0;
          for (int i : idx) mask |= 1u << i;
          position[m][mask] = static_cast<int>(masks[m][k].size());
          masks[m][k].push_back(mask);
          int i = k - 1;
          while (i >= 0 && idx[i] == m - k + i) --i;
          if (i < 0) break;
          ++idx[i];
          for (int t = i + 1; t < k; ++t) idx[t] = idx[t - 1] + 1;
        }
      }
    }
  }
};

inline const SubsetTable& subset_table() {
  static const SubsetTable table;
  return table;
}

inline const std::vector<std::uint32_t>& subsets(int m, int k) {
  return subset_table().masks[m][k];
}

inline int subset_position(int m, std::uint32_t mask) { return subset_table().position[m][mask]; }

// Sign of the shuffle that sorts the concatenation (a, b) of two disjoint
// increasing tuples: parity of pairs i in a, j in b with i > j.
inline double merge_sign(std::uint32_t a, std::uint32_t b) {
  int inversions = 0;
  for (std::uint32_t bb = b; bb != 0; bb &= bb - 1) {
    const int j = std::countr_zero(bb);
    inversions += std::popcount(a >> (j + 1));
  }
  return (inversions & 1) != 0 ? -1.0 : 1.0;
}

// Precomputed entries for the interior product of a degree-d form on R^m.
struct ContractionEntry {
  int target;
  int source;
  int axis;
  double sign;
};

struct ContractionTables {
  std::vector<std::vector<std::vector<ContractionEntry>>> tables;

  ContractionTables() : tables(kMaxAmbientDim + 1) {
    for (int m = 0; m <= kMaxAmbientDim; ++m) {
      tables[m].resize(m + 1);
      for (int d = 1; d <= m; ++d) {
        const auto& src = subsets(m, d);
        auto& out = tables[m][d];
        out.reserve(src.size() * d);
        for (std::size_t s = 0; s < src.size(); ++s) {
          for (std::uint32_t bits = src[s]; bits != 0; bits &= bits - 1) {
            const int i = std::countr_zero(bits);
            const std::uint32_t rest = src[s] & ~(1u << i);
            const int below = std::popcount(rest & ((1u << i) - 1));
            out.push_back({subset_position(m, rest), static_cast<int>(s), i,
                           (below & 1) != 0 ? -1.0 : 1.0});
          }
        }
      }
    }
  }
};

inline const std::vector<ContractionEntry>& contraction_table(int m, int d) {
  static const ContractionTables tables;
  return tables.tables[m][d];
}

// out = iota_v(in), where in holds a degree-d form on R^m.
inline void contract(std::span<const double> in, int m, int d, const double* v, std::vector<double>& out) {
  out.assign(static_cast<std::size_t>(binomial(m, d - 1)), 0.0);
  for (const auto& e : contraction_table(m, d)) out[e.target] += e.sign * v[e.axis] * in[e.source];
}

}  // namespace detail

enum class Variance { kVector, kForm };

// Alternating tensor of fixed degree on R^m, stored densely over the C(m,k)
// increasing index tuples. Vector and form flavours share the layout but
// are distinct types.
template <Variance V>
class Alternating {
 public:
  Alternating(int degree, int ambient_dim) : degree_(degree), dim_(ambient_dim) {
    if (ambient_dim < 0 || ambient_dim > kMaxAmbientDim)
      throw std::invalid_argument("ambient dimension out of range: " + std::to_string(ambient_dim));
    if (degree < 0 || degree > ambient_dim)
      throw std::invalid_argument("degree " + std::to_string(degree) + " invalid for ambient dimension " +
                                  std::to_string(ambient_dim));
    coeffs_.assign(static_cast<std::size_t>(detail::binomial(dim_, degree_)), 0.0);
  }

  Alternating(int degree, int ambient_dim, std::vector<double> coeffs) : Alternating(degree, ambient_dim) {
    if (coeffs.size() != coeffs_.size()) throw std::invalid_argument("coefficient count does not match C(m,k)");
    coeffs_ = std::move(coeffs);
  }

  // Basis element for an arbitrary index list; reorders with the permutation
  // sign, and repeated indices give zero.
  static Alternating basis(int ambient_dim, std::span<const int> indices) {
    Alternating out(static_cast<int>(indices.size()), ambient_dim);
    std::uint32_t mask = 0;
    double sign = 1.0;
    for (int i : indices) {
      if (i < 0 || i >= ambient_dim) throw std::invalid_argument("basis index out of range");
      if ((mask >> i) & 1u) return out;
      sign *= detail::merge_sign(mask, 1u << i);
      mask |= 1u << i;
    }
    out.coeffs_[detail::subset_position(ambient_dim, mask)] = sign;
    return out;
  }

  static Alternating basis(int ambient_dim, std::initializer_list<int> indices) {
    return basis(ambient_dim, std::span<const int>(indices.begin(), indices.size()));
  }

  static Alternating from_components(std::span<const double> v) {
    Alternating out(1, static_cast<int>(v.size()));
    std::copy(v.begin(), v.end(), out.coeffs_.begin());
    return out;
  }

  static Alternating scalar(int ambient_dim, double value) {
    Alternating out(0, ambient_dim);
    out.coeffs_[0] = value;
    return out;
  }

  int degree() const noexcept { return degree_; }
  int ambient_dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return coeffs_.size(); }
  std::span<const double> coefficients() const noexcept { return coeffs_; }
  double operator[](std::size_t pos) const { return coeffs_[pos]; }
  std::uint32_t mask(std::size_t pos) const { return detail::subsets(dim_, degree_)[pos]; }

  std::vector<int> indices(std::size_t pos) const {
    std::vector<int> out;
    for (std::uint32_t b = mask(pos); b != 0; b &= b - 1) out.push_back(std::countr_zero(b));
    return out;
  }

  // Coefficient on the tuple given in any order (antisymmetry applied).
  double coefficient(std::initializer_list<int> tuple) const {
    const auto e = basis(dim_, tuple);
    if (e.degree() != degree_) throw std::invalid_argument("tuple length differs from degree");
    for (std::size_t i = 0; i < e.size(); ++i)
      if (e.coeffs_[i] != 0.0) return e.coeffs_[i] * coeffs_[i];
    return 0.0;
  }

  double max_abs() const noexcept {
    double m = 0.0;
    for (double c : coeffs_) m = std::max(m, std::abs(c));
    return m;
  }

  double euclidean_norm() const noexcept {
    double s = 0.0;
    for (double c : coeffs_) s += c * c;
    return std::sqrt(s);
  }

  bool is_zero() const noexcept {
    return std::all_of(coeffs_.begin(), coeffs_.end(), [](double c) { return c == 0.0; });
  }

  Alternating& operator+=(const Alternating& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += o.coeffs_[i];
    return *this;
  }
  Alternating& operator-=(const Alternating& o) {
    require_same_shape(o);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] -= o.coeffs_[i];
    return *this;
  }
  Alternating& operator*=(double s) noexcept {
    for (double& c : coeffs_) c *= s;
    return *this;
  }

  friend Alternating operator+(Alternating a, const Alternating& b) { return a += b; }
  friend Alternating operator-(Alternating a, const Alternating& b) { return a -= b; }
  friend Alternating operator*(Alternating a, double s) { return a *= s; }
  friend Alternating operator*(double s, Alternating a) { return a *= s; }
  friend Alternating operator-(Alternating a) { return a *= -1.0; }
  friend bool operator==(const Alternating& a, const Alternating& b) {
    return a.degree_ == b.degree_ && a.dim_ == b.dim_ && a.coeffs_ == b.coeffs_;
  }

  void require_same_shape(const Alternating& o) const {
    if (o.degree_ != degree_ || o.dim_ != dim_)
      throw std::invalid_argument("alternating tensors differ in degree or ambient dimension");
  }

 private:
  int degree_;
  int dim_;
  std::vector<double> coeffs_;
};

using Multivector = Alternating<Variance::kVector>;
using Form = Alternating<Variance::kForm>;

template <Variance V>
Alternating<V> wedge(const Alternating<V>& a, const Alternating<V>& b) {
  if (a.ambient_dim() != b.ambient_dim()) throw std::invalid_argument("wedge: ambient dimensions differ");
  const int m = a.ambient_dim();
  if (a.degree() + b.degree() > m) throw std::invalid_argument("wedge: total degree exceeds ambient dimension");
  std::vector<double> out(static_cast<std::size_t>(detail::binomial(m, a.degree() + b.degree())), 0.0);
  const auto& am = detail::subsets(m, a.degree());
  const auto& bm = detail::subsets(m, b.degree());
  for (std::size_t i = 0; i < am.size(); ++i) {
    if (a[i] == 0.0) continue;
    for (std::size_t j = 0; j < bm.size(); ++j) {
      if (b[j] == 0.0 || (am[i] & bm[j]) != 0) continue;
      out[detail::subset_position(m, am[i] | bm[j])] += detail::merge_sign(am[i], bm[j]) * a[i] * b[j];
    }
  }
  return Alternating<V>(a.degree() + b.degree(), m, std::move(out));
}

// Pairing of a k-form with a k-vector in dual coordinate bases.
inline double evaluate(const Form& phi, const Multivector& xi) {
  if (phi.degree() != xi.degree() || phi.ambient_dim() != xi.ambient_dim())
    throw std::invalid_argument("evaluate: degree or ambient dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) s += phi[i] * xi[i];
  return s;
}

// iota_v phi, i.e. (iota_v phi)(a_2, ..., a_k) = phi(v, a_2, ..., a_k).
inline Form interior(const Form& phi, std::span<const double> v) {
  if (static_cast<int>(v.size()) != phi.ambient_dim()) throw std::invalid_argument("interior: vector size mismatch");
  if (phi.degree() == 0) throw std::invalid_argument("interior: degree-zero form");
  std::vector<double> out;
  detail::contract(phi.coefficients(), phi.ambient_dim(), phi.degree(), v.data(), out);
  return Form(phi.degree() - 1, phi.ambient_dim(), std::move(out));
}

// Re-index a tensor on R^p into R^m by sending coordinate i to i + offset.
template <Variance V>
Alternating<V> embed(const Alternating<V>& a, int target_dim, int offset) {
  if (offset < 0 || offset + a.ambient_dim() > target_dim) throw std::invalid_argument("embed: does not fit");
  Alternating<V> out(a.degree(), target_dim);
  std::vector<double> coeffs(out.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    coeffs[detail::subset_position(target_dim, a.mask(i) << offset)] = a[i];
  return Alternating<V>(a.degree(), target_dim, std::move(coeffs));
}

// Diagonal Riemannian metric on R^m. Blocks with a common conformal factor
// are expressed by scaling a contiguous run of weights.
class BlockMetric {
 public:
  explicit BlockMetric(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty() || static_cast<int>(weights_.size()) > kMaxAmbientDim)
      throw std::invalid_argument("metric dimension out of range");
    for (double w : weights_)
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("metric weights must be positive and finite");
  }

  static BlockMetric flat(int m) { return BlockMetric(std::vector<double>(static_cast<std::size_t>(m), 1.0)); }

  BlockMetric with_block_factor(int begin, int end, double factor) const {
    if (begin < 0 || end > dim() || begin > end) throw std::invalid_argument("metric block out of range");
    auto w = weights_;
    for (int i = begin; i < end; ++i) w[i] *= factor;
    return BlockMetric(std::move(w));
  }

  BlockMetric scaled(double lambda) const { return with_block_factor(0, dim(), lambda); }

  int dim() const noexcept { return static_cast<int>(weights_.size()); }
  double weight(int i) const { return weights_.at(i); }
  std::span<const double> weights() const noexcept { return weights_; }

  // Product of the weights over the axes in mask: the squared length of
  // the coordinate blade e_I.
  double blade_weight(std::uint32_t mask) const {
    double p = 1.0;
    for (std::uint32_t b = mask; b != 0; b &= b - 1) p *= weights_[std::countr_zero(b)];
    return p;
  }

  double inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b) const {
    require(static_cast<int>(a.size()));
    double s = 0.0;
    for (int i = 0; i < dim(); ++i) s += weights_[i] * a[i] * b[i];
    return s;
  }

  double norm(const Eigen::VectorXd& v) const { return std::sqrt(inner(v, v)); }

  double norm(const Multivector& xi) const {
    require(xi.ambient_dim());
    double s = 0.0;
    for (std::size_t i = 0; i < xi.size(); ++i) s += xi[i] * xi[i] * blade_weight(xi.mask(i));
    return std::sqrt(s);
  }

  double norm(const Form& phi) const {
    require(phi.ambient_dim());
    double s = 0.0;
    for (std::size_t i = 0; i < phi.size(); ++i) s += phi[i] * phi[i] / blade_weight(phi.mask(i));
    return std::sqrt(s);
  }

  friend bool operator==(const BlockMetric& a, const BlockMetric& b) { return a.weights_ == b.weights_; }

 private:
  void require(int m) const {
    if (m != dim()) throw std::invalid_argument("metric dimension mismatch");
  }
  std::vector<double> weights_;
};

// k vectors in R^m, stored as the columns of an m x k matrix.
class Frame {
 public:
  Frame() = default;
  explicit Frame(Eigen::MatrixXd vectors) : vectors_(std::move(vectors)) {}

  static Frame coordinate(int m, std::span<const int> axes) {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(axes.size()));
    for (std::size_t c = 0; c < axes.size(); ++c) {
      if (axes[c] < 0 || axes[c] >= m) throw std::invalid_argument("frame axis out of range");
      v(axes[c], static_cast<Eigen::Index>(c)) = 1.0;
    }
    return Frame(std::move(v));
  }
  static Frame coordinate(int m, std::initializer_list<int> axes) {
    return coordinate(m, std::span<const int>(axes.begin(), axes.size()));
  }

  int ambient_dim() const noexcept { return static_cast<int>(vectors_.rows()); }
  int size() const noexcept { return static_cast<int>(vectors_.cols()); }
  const Eigen::MatrixXd& vectors() const noexcept { return vectors_; }
  Eigen::VectorXd vector(int i) const { return vectors_.col(i); }

 private:
  Eigen::MatrixXd vectors_;
};

// Modified Gram-Schmidt under g, applied twice. Orientation is preserved.
inline Frame orthonormalize(const Frame& f, const BlockMetric& g) {
  if (f.ambient_dim() != g.dim()) throw std::invalid_argument("orthonormalize: frame and metric dimensions differ");
  Eigen::MatrixXd q = f.vectors();
  for (int i = 0; i < f.size(); ++i) {
    Eigen::VectorXd v = q.col(i);
    const double original = g.norm(v);
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < i; ++k) v -= g.inner(q.col(k), v) * q.col(k);
    const double n = g.norm(v);
    if (!(n > 1e-10 * original) || !(original > 0.0) || !std::isfinite(n))
      throw DegenerateFrameError("frame is rank deficient at vector " + std::to_string(i));
    q.col(i) = v / n;
  }
  return Frame(std::move(q));
}

// v_1 ^ ... ^ v_k of the raw columns; coefficient on I is det of rows I.
inline Multivector wedge_of(const Frame& f) {
  const int m = f.ambient_dim();
  Multivector acc = Multivector::scalar(m, 1.0);
  for (int c = 0; c < f.size(); ++c) {
    const Eigen::VectorXd v = f.vector(c);
    acc = wedge(acc, Multivector::from_components(std::span<const double>(v.data(), static_cast<std::size_t>(m))));
  }
  return acc;
}

// Unit simple k-vector of the oriented plane spanned by the frame, unit in g.
inline Multivector simple_from_frame(const Frame& f, const BlockMetric& g) { return wedge_of(orthonormalize(f, g)); }

// Musical isomorphism on k-vectors: lowers every index with g.
inline Form dual_form(const Multivector& v, const BlockMetric& g) {
  if (v.ambient_dim() != g.dim()) throw std::invalid_argument("dual_form: metric dimension mismatch");
  std::vector<double> c(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) c[i] = v[i] * g.blade_weight(v.mask(i));
  return Form(v.degree(), v.ambient_dim(), std::move(c));
}

// Pullback of a form on R^q along the linear map A : R^p -> R^q (A is q x p).
inline Form pullback(const Form& phi, const Eigen::MatrixXd& a) {
  if (a.rows() != phi.ambient_dim()) throw std::invalid_argument("pullback: matrix rows differ from form dimension");
  const int p = static_cast<int>(a.cols());
  Form out(phi.degree(), p);
  std::vector<double> c(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::vector<int> axes = out.indices(i);
    Eigen::MatrixXd cols(a.rows(), static_cast<Eigen::Index>(axes.size()));
    for (std::size_t t = 0; t < axes.size(); ++t) cols.col(static_cast<Eigen::Index>(t)) = a.col(axes[t]);
    c[i] = evaluate(phi, wedge_of(Frame(std::move(cols))));
  }
  return Form(phi.degree(), p, std::move(c));
}

// Numerical dimension of span(a) ∩ span(b): both frames are orthonormalized,
// concatenated, and singular values at or below tol count as zero.
inline int intersection_dimension(const Frame& a, const Frame& b, double tol = 1e-8) {
  if (a.ambient_dim() != b.ambient_dim()) throw std::invalid_argument("intersection_dimension: ambient mismatch");
  const auto g = BlockMetric::flat(a.ambient_dim());
  const Frame qa = orthonormalize(a, g);
  const Frame qb = orthonormalize(b, g);
  Eigen::MatrixXd joined(a.ambient_dim(), a.size() + b.size());
  joined << qa.vectors(), qb.vectors();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(joined);
  int rank = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++rank;
  return a.size() + b.size() - rank;
}

}  // namespace caldesing
