#pragma once

// Comass of differential forms: exact values for simple forms, the torus
// calibration form, and a multi-start ascent over unit simple k-vectors that
// certifies lower bounds for everything else.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "caldesing/detail/parallel.hpp"
#include "caldesing/error.hpp"
#include "caldesing/exterior.hpp"

namespace caldesing {

// Psi(alpha, beta, lambda, mu) = lambda dx_1..dx_k ^ alpha* + mu dy_1..dy_k ^ beta*
// on R^{2k} x R^m, coordinates ordered (x_1..x_k, y_1..y_k, a_1..a_m).
struct TorusFormSpec {
  int n_minus_j = 1;
  Frame alpha;
  Frame beta;
  double lambda = 1.0;
  double mu = 1.0;

  void validate() const {
    if (n_minus_j < 1) throw std::invalid_argument("torus form: n - j must be at least 1");
    if (!(std::abs(lambda) <= 1.0) || !(std::abs(mu) <= 1.0))
      throw std::invalid_argument("torus form: lambda and mu must lie in [-1, 1]");
    if (alpha.ambient_dim() != beta.ambient_dim()) throw std::invalid_argument("torus form: planes live in different R^m");
    const int m = alpha.ambient_dim();
    if (alpha.size() != beta.size() || alpha.size() < 1 || alpha.size() > m)
      throw std::invalid_argument("torus form: planes must share a dimension l with 1 <= l <= m");
    if (2 * n_minus_j + m > kMaxAmbientDim) throw std::invalid_argument("torus form: ambient dimension too large");
  }

  int ambient_dim() const { return 2 * n_minus_j + alpha.ambient_dim(); }
  int degree() const { return n_minus_j + alpha.size(); }

  // The two planes the form calibrates at lambda = 1 and mu = 1.
  Frame x_plane() const { return block_plane(0, alpha); }
  Frame y_plane() const { return block_plane(n_minus_j, beta); }

 private:
  Frame block_plane(int first, const Frame& tail) const {
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(ambient_dim(), degree());
    for (int a = 0; a < n_minus_j; ++a) v(first + a, a) = 1.0;
    v.block(2 * n_minus_j, n_minus_j, tail.ambient_dim(), tail.size()) = tail.vectors();
    return Frame(std::move(v));
  }
};

inline Form build_torus_form(const TorusFormSpec& s) {
  s.validate();
  const int k = s.n_minus_j;
  const int m = s.alpha.ambient_dim();
  const int total = 2 * k + m;
  const auto flat = BlockMetric::flat(m);
  std::vector<int> xs(k), ys(k);
  for (int a = 0; a < k; ++a) {
    xs[a] = a;
    ys[a] = k + a;
  }
  const Form alpha_star = embed(dual_form(simple_from_frame(s.alpha, flat), flat), total, 2 * k);
  const Form beta_star = embed(dual_form(simple_from_frame(s.beta, flat), flat), total, 2 * k);
  return s.lambda * wedge(Form::basis(total, xs), alpha_star) + s.mu * wedge(Form::basis(total, ys), beta_star);
}

inline double conformal_comass_factor(int k, double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("conformal factor must be positive");
  if (k < 0) throw std::invalid_argument("degree must be non-negative");
  return std::pow(lambda, -0.5 * k);
}

// A k-form is simple iff its (k-1)-fold contractions with coordinate vectors
// span a k-dimensional space of covectors.
inline bool is_simple(const Form& phi, double tol = 1e-8) {
  const int m = phi.ambient_dim();
  const int k = phi.degree();
  if (k <= 1 || k >= m - 1 || phi.is_zero()) return true;
  const auto& rows = detail::subsets(m, k - 1);
  Eigen::MatrixXd contractions = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rows.size()), m);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (int i = 0; i < m; ++i) {
      if ((rows[r] >> i) & 1u) continue;
      const std::uint32_t full = rows[r] | (1u << i);
      contractions(static_cast<Eigen::Index>(r), i) =
          detail::merge_sign(rows[r], 1u << i) * phi[detail::subset_position(m, full)];
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(contractions);
  const auto& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * sv[0]) ++rank;
  return rank <= k;
}

enum class Simplicity { kVerify, kConstructedSimple };

// Exact comass of a simple form: its Riemannian norm.
inline double comass_simple_form(const Form& phi, const BlockMetric& g, Simplicity provenance = Simplicity::kVerify) {
  if (provenance == Simplicity::kVerify && !is_simple(phi)) throw NotSimpleError("form is not simple");
  return g.norm(phi);
}

inline int default_restarts(int degree) { return degree <= 3 ? 64 : 256; }

struct ComassOptions {
  int restarts = 0;  // 0 selects default_restarts(degree)
  double tolerance = 1e-10;
  int max_iterations = 2000;
  std::uint64_t seed = 1;
  std::vector<Frame> seeds;
  int threads = 1;
};

struct RestartStats {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct ComassEstimate {
  double lower_bound = 0.0;
  Frame maximizer;
  int restarts_used = 0;
  bool converged = false;
  std::vector<RestartStats> restarts;
};

namespace detail {

// Value and Euclidean gradient of V -> phi(v_1, ..., v_k) for a form given
// in g-orthonormal coordinates.
class FrameObjective {
 public:
  FrameObjective(std::vector<double> coeffs, int m, int k) : coeffs_(std::move(coeffs)), m_(m), k_(k) {}

  double operator()(const Eigen::MatrixXd& v, Eigen::MatrixXd& grad) const {
    grad.resize(m_, k_);
    // prefix[c] = iota_{v_{c-1}} ... iota_{v_0} phi
    std::vector<std::vector<double>> prefix(static_cast<std::size_t>(k_));
    prefix[0] = coeffs_;
    for (int c = 1; c < k_; ++c) contract(prefix[c - 1], m_, k_ - c + 1, v.col(c - 1).data(), prefix[c]);
    std::vector<double> cur, next;
    for (int c = 0; c < k_; ++c) {
      cur = prefix[c];
      int deg = k_ - c;
      for (int t = c + 1; t < k_; ++t) {
        contract(cur, m_, deg, v.col(t).data(), next);
        cur.swap(next);
        --deg;
      }
      const double sign = ((k_ - 1 - c) & 1) != 0 ? -1.0 : 1.0;
      for (int i = 0; i < m_; ++i) grad(i, c) = sign * cur[i];
    }
    return v.col(k_ - 1).dot(grad.col(k_ - 1));
  }

  double scale() const {
    double s = 0.0;
    for (double c : coeffs_) s += c * c;
    return std::sqrt(s);
  }

 private:
  std::vector<double> coeffs_;
  int m_;
  int k_;
};

inline bool orthonormalize_flat(Eigen::MatrixXd& v) {
  for (Eigen::Index i = 0; i < v.cols(); ++i) {
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index k = 0; k < i; ++k) v.col(i) -= v.col(k).dot(v.col(i)) * v.col(k);
    const double n = v.col(i).norm();
    if (!(n > 1e-12) || !std::isfinite(n)) return false;
    v.col(i) /= n;
  }
  return true;
}

struct AscentResult {
  double value;
  Eigen::MatrixXd frame;
  int iterations;
  bool converged;
};

// Projected gradient ascent on orthonormal frames with a retraction by
// re-orthonormalization; the step is fixed and halved whenever a trial step
// fails to improve.
inline AscentResult ascend(const FrameObjective& obj, Eigen::MatrixXd v, double tol, int max_iterations) {
  const int k = static_cast<int>(v.cols());
  Eigen::MatrixXd grad, trial_grad;
  double value = obj(v, grad);
  if (value < 0.0) {
    v.col(k - 1) *= -1.0;
    value = obj(v, grad);
  }
  const double scale = std::max(obj.scale(), 1e-300);
  double step = 1.0 / scale;
  const double min_step = step * 1e-14;
  int it = 0;
  bool converged = false;
  for (; it < max_iterations; ++it) {
    const Eigen::MatrixXd projected = grad - v * (v.transpose() * grad);
    const double gnorm = projected.norm();
    if (gnorm <= tol * scale) {
      converged = true;
      break;
    }
    bool improved = false;
    while (step >= min_step) {
      Eigen::MatrixXd trial = v + step * projected;
      if (orthonormalize_flat(trial)) {
        const double tv = obj(trial, trial_grad);
        if (tv > value) {
          v = std::move(trial);
          grad = trial_grad;
          value = tv;
          improved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!improved) {
      // No representable improvement left; the iterate sits at a maximum up
      // to rounding.
      converged = gnorm <= 1e-6 * scale;
      break;
    }
  }
  return {value, std::move(v), it, converged};
}

}  // namespace detail

// Maximizes phi over g-unit simple k-vectors. The returned value is always a
// valid lower bound for the comass; the witness frame is g-orthonormal.
inline ComassEstimate comass_optimize(const Form& phi, const BlockMetric& g, const ComassOptions& options = {}) {
  const int m = phi.ambient_dim();
  const int k = phi.degree();
  if (g.dim() != m) throw std::invalid_argument("comass_optimize: metric dimension mismatch");
  const int restarts = options.restarts > 0 ? options.restarts : default_restarts(k);
  if (options.restarts < 0) throw std::invalid_argument("comass_optimize: restarts must be at least 1");

  ComassEstimate est;
  if (k == 0) {
    est.lower_bound = std::abs(phi[0]);
    est.maximizer = Frame(Eigen::MatrixXd::Zero(m, 0));
    est.restarts_used = 1;
    est.converged = true;
    est.restarts.push_back({est.lower_bound, 0, true});
    return est;
  }

  // Coordinates in which g is the identity: u_i = sqrt(w_i) x_i.
  std::vector<double> sqrt_w(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) sqrt_w[i] = std::sqrt(g.weight(i));
  std::vector<double> coeffs(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) {
    double s = 1.0;
    for (std::uint32_t b = phi.mask(i); b != 0; b &= b - 1) s *= sqrt_w[std::countr_zero(b)];
    coeffs[i] = phi[i] / s;
  }
  const detail::FrameObjective objective(std::move(coeffs), m, k);

  for (const auto& s : options.seeds)
    if (s.ambient_dim() != m || s.size() != k) throw std::invalid_argument("comass_optimize: seed frame has wrong shape");

  const std::size_t starts = options.seeds.size() + static_cast<std::size_t>(restarts);
  std::vector<detail::AscentResult> results(starts);
  detail::parallel_for(starts, options.threads, [&](std::size_t r) {
    Eigen::MatrixXd v(m, k);
    bool ok = false;
    if (r < options.seeds.size()) {
      v = options.seeds[r].vectors();
      for (int i = 0; i < m; ++i) v.row(i) *= sqrt_w[i];
      ok = detail::orthonormalize_flat(v);
    }
    auto rng = detail::make_rng(options.seed, 0x636f6d61u, r);
    std::normal_distribution<double> normal;
    while (!ok) {
      for (int i = 0; i < m; ++i)
        for (int c = 0; c < k; ++c) v(i, c) = normal(rng);
      ok = detail::orthonormalize_flat(v);
    }
    results[r] = detail::ascend(objective, std::move(v), options.tolerance, options.max_iterations);
  });

  std::size_t best = 0;
  for (std::size_t r = 0; r < starts; ++r) {
    est.restarts.push_back({results[r].value, results[r].iterations, results[r].converged});
    if (results[r].value > results[best].value) best = r;
  }
  Eigen::MatrixXd witness = results[best].frame;
  for (int i = 0; i < m; ++i) witness.row(i) /= sqrt_w[i];
  est.lower_bound = results[best].value;
  est.maximizer = Frame(std::move(witness));
  est.restarts_used = static_cast<int>(starts);
  est.converged = results[best].converged;
  return est;
}

struct CalibrationCheck {
  bool calibrated = false;
  double plane_value = 0.0;
  double comass_lower_bound = 0.0;
};

// A plane is calibrated when phi reaches 1 on it and no plane exceeds 1.
inline CalibrationCheck is_calibrated(const Form& phi, const Frame& plane, const BlockMetric& g, double tol,
                                      ComassOptions options = {}) {
  CalibrationCheck out;
  out.plane_value = evaluate(phi, simple_from_frame(plane, g));
  options.seeds.push_back(plane);
  out.comass_lower_bound = comass_optimize(phi, g, options).lower_bound;
  out.calibrated = out.plane_value >= 1.0 - tol && out.comass_lower_bound <= 1.0 + tol;
  return out;
}

}  // namespace caldesing
