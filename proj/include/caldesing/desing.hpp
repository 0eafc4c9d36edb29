#pragma once

// Model desingularization: the sheets x-plane x N and y-plane x graph(f) in
// (R^2/Z^2)^(n-j) x N x S^1, the calibration
//   phi = dx_1..dx_k ^ nu + dy_1..dy_k ^ pi* omega
// and the rescaled metric in which phi has comass one.
//
// Ambient coordinates are ordered x_0..x_{k-1}, y_0..y_{k-1}, p_0..p_{j-1}, t
// with k = n - j, N = R^j / rho Z^j and t in [-pi, pi).

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cells.hpp"
#include "comass.hpp"
#include "detail/parallel.hpp"
#include "error.hpp"
#include "exterior.hpp"
#include "whitney.hpp"

namespace caldesing {

enum class Mode { kMinimizing, kStablePair };

inline const char* mode_name(Mode m) { return m == Mode::kMinimizing ? "minimizing" : "stable_pair"; }

struct ModelParams {
  int n = 3;
  int j = 1;
  double rho = 4.0;
  double epsilon = 1e-3;
  int order = 3;
  Mode mode = Mode::kMinimizing;
  // Debug switch: leave dx_1 unscaled, which breaks the comass bound.
  bool corrupt_metric = false;
  int reach_samples = 16;
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 2) throw std::invalid_argument("n must be at least 2");
    if (mode == Mode::kMinimizing && (j < 1 || j > n - 2))
      throw std::invalid_argument("minimizing mode needs 1 <= j <= n - 2");
    if (mode == Mode::kStablePair && j != n - 1) throw std::invalid_argument("stable-pair mode needs j = n - 1");
    if (j > kMaxTorusDim) throw std::invalid_argument("j exceeds the supported torus dimension");
    if (2 * (n - j) + j + 1 > kMaxAmbientDim) throw std::invalid_argument("ambient dimension too large");
    if (!(rho > 0.0) || !std::isfinite(rho)) throw std::invalid_argument("rho must be positive");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("epsilon must be positive");
    if (order < 2) throw std::invalid_argument("the projection needs f of order at least 2");
    if (reach_samples < 1) throw std::invalid_argument("reach_samples must be positive");
  }
};

namespace detail {

inline double wrap_angle(double t) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(t + std::numbers::pi, two_pi);
  if (r < 0) r += two_pi;
  return r - std::numbers::pi;
}

inline int find_multi_index(const std::vector<MultiIndex>& list, const MultiIndex& a) {
  for (std::size_t i = 0; i < list.size(); ++i)
    if (list[i] == a) return static_cast<int>(i);
  throw std::logic_error("multi-index not found");
}

}  // namespace detail

struct Projection {
  Eigen::VectorXd base;   // nearest base point, unwrapped near the query
  Eigen::VectorXd point;  // (base, f(base))
  double distance = 0.0;
  int iterations = 0;
};

class AmbientModel {
 public:
  AmbientModel(const ModelParams& params, DyadicCellSet set)
      : params_(params), set_(std::move(set)), f_(build_f(params, set_)) {
    const auto alphas = multi_indices(params_.j, 2);
    for (int a = 0; a < params_.j; ++a) {
      MultiIndex e{};
      e[a] = 1;
      grad_index_[a] = detail::find_multi_index(alphas, e);
      for (int b = 0; b < params_.j; ++b) {
        MultiIndex h{};
        h[a] += 1;
        h[b] += 1;
        hess_index_[a][b] = detail::find_multi_index(alphas, h);
      }
    }
  }

  const ModelParams& params() const noexcept { return params_; }
  int n() const noexcept { return params_.n; }
  int j() const noexcept { return params_.j; }
  int k() const noexcept { return params_.n - params_.j; }
  int dim() const noexcept { return 2 * k() + j() + 1; }
  int degree() const noexcept { return k() + j(); }
  double rho() const noexcept { return params_.rho; }
  Mode mode() const noexcept { return params_.mode; }
  const DyadicCellSet& set() const noexcept { return set_; }
  const SmoothFunction& f() const noexcept { return f_; }

  int x_axis(int b) const { return b; }
  int y_axis(int b) const { return k() + b; }
  int p_axis(int i) const { return 2 * k() + i; }
  int t_axis() const { return 2 * k() + j(); }

  double reach() const noexcept { return reach_; }
  void set_reach(double r) { reach_ = r; }

  struct Jet2 {
    double value = 0.0;
    Eigen::VectorXd grad;
    Eigen::MatrixXd hess;
  };

  Jet2 jet2(std::span<const double> p) const {
    const auto jt = f_.jet(p, 2);
    Jet2 out;
    out.value = jt[0];
    out.grad.resize(j());
    out.hess.resize(j(), j());
    for (int a = 0; a < j(); ++a) {
      out.grad[a] = jt[grad_index_[a]];
      for (int b = 0; b < j(); ++b) out.hess(a, b) = jt[hess_index_[a][b]];
    }
    return out;
  }

  Eigen::VectorXd gradient(std::span<const double> p) const { return jet2(p).grad; }

  // Half squared distance from q = (p, t) to the graph point over base b.
  double energy(const Eigen::VectorXd& q, const Eigen::VectorXd& b) const {
    const double e = detail::wrap_angle(f_.value(std::span<const double>(b.data(), j())) - q[j()]);
    return 0.5 * ((b - q.head(j())).squaredNorm() + e * e);
  }

  // Damped Newton on the base point from the given start. Returns false when
  // the iteration does not settle; the residual trace is appended either way.
  bool newton(const Eigen::VectorXd& q, Eigen::VectorXd& b, std::vector<double>& trace, int& iterations) const {
    const int jj = j();
    for (int it = 0; it < 60; ++it) {
      iterations = it + 1;
      const Jet2 jt = jet2(std::span<const double>(b.data(), jj));
      const double e = detail::wrap_angle(jt.value - q[jj]);
      const Eigen::VectorXd g = (b - q.head(jj)) + e * jt.grad;
      const double res = g.norm();
      trace.push_back(res);
      if (res <= 1e-14 * (1.0 + q.head(jj).norm())) return true;
      Eigen::MatrixXd h = Eigen::MatrixXd::Identity(jj, jj) + jt.grad * jt.grad.transpose() + e * jt.hess;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      Eigen::VectorXd step = -ldlt.solve(g);
      if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) step = -g;
      // Energy differences below rounding are invisible; accept those steps
      // when they shrink the residual.
      const double e0 = energy(q, b);
      const double slack = 1e-14 * (1.0 + e0);
      bool moved = false;
      for (int halve = 0; halve < 40; ++halve) {
        const Eigen::VectorXd trial = b + step;
        const double e1 = energy(q, trial);
        bool accept = e1 < e0 - slack;
        if (!accept && e1 <= e0 + slack) {
          const Jet2 tj = jet2(std::span<const double>(trial.data(), jj));
          const double te = detail::wrap_angle(tj.value - q[jj]);
          accept = ((trial - q.head(jj)) + te * tj.grad).norm() < res;
        }
        if (accept) {
          moved = (trial - b).norm() > 0.0;
          b = trial;
          break;
        }
        step *= 0.5;
      }
      if (!moved) return res <= 1e-10;
    }
    return false;
  }

 private:
  static SmoothFunction build_f(const ModelParams& p, const DyadicCellSet& set) {
    p.validate();
    if (set.torus_dim() != p.j) throw std::invalid_argument("singular set lives in the wrong dimension");
    if (set.side() != p.rho) throw std::invalid_argument("singular set lives on a torus of a different side");
    return build_vanishing_function(set, p.epsilon, p.order);
  }

  ModelParams params_;
  DyadicCellSet set_;
  SmoothFunction f_;
  std::array<int, kMaxTorusDim> grad_index_{};
  std::array<std::array<int, kMaxTorusDim>, kMaxTorusDim> hess_index_{};
  double reach_ = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline Projection finish_projection(const AmbientModel& m, const Eigen::VectorXd& q, const Eigen::VectorXd& b,
                                    int iterations) {
  Projection out;
  out.base = b;
  out.point.resize(m.j() + 1);
  out.point.head(m.j()) = b;
  const double fb = m.f().value(std::span<const double>(b.data(), m.j()));
  out.point[m.j()] = fb;
  out.distance = std::sqrt(2.0 * m.energy(q, b));
  out.iterations = iterations;
  return out;
}

// Best base point on a grid around q; the grid spacing keeps the scan under
// about max_points evaluations.
inline Eigen::VectorXd scan_seed(const AmbientModel& m, const Eigen::VectorXd& q, double radius, int max_points) {
  const int j = m.j();
  const int per_axis = std::max(3, static_cast<int>(std::pow(static_cast<double>(max_points), 1.0 / j)));
  const double spacing = 2.0 * radius / (per_axis - 1);
  long long total = 1;
  for (int a = 0; a < j; ++a) total *= per_axis;
  Eigen::VectorXd best = q.head(j), b(j);
  double best_e = m.energy(q, best);
  for (long long n = 0; n < total; ++n) {
    long long r = n;
    for (int a = 0; a < j; ++a) {
      b[a] = q[a] - radius + spacing * static_cast<double>(r % per_axis);
      r /= per_axis;
    }
    const double e = m.energy(q, b);
    if (e < best_e) {
      best_e = e;
      best = b;
    }
  }
  return best;
}

}  // namespace detail

// Nearest point of graph(f) to q = (p, t) in N x S^1. Newton starts at the
// base point p; a grid scan reseeds it when it stalls.
inline Projection nearest_point_projection(const AmbientModel& m, std::span<const double> q) {
  const int j = m.j();
  if (static_cast<int>(q.size()) != j + 1) throw std::invalid_argument("projection expects a point of N x S^1");
  Eigen::VectorXd qv = Eigen::Map<const Eigen::VectorXd>(q.data(), j + 1);
  std::vector<double> trace;
  int iterations = 0;
  Eigen::VectorXd b = qv.head(j);
  bool ok = m.newton(qv, b, trace, iterations);
  if (!ok) {
    b = detail::scan_seed(m, qv, 1.0, 2000);
    ok = m.newton(qv, b, trace, iterations);
  }
  if (!ok) throw NonConvergenceError("nearest-point projection did not converge", std::move(trace));
  Projection out = detail::finish_projection(m, qv, b, iterations);
  if (!(out.distance < 1.0))
    throw OutOfDomainError("point lies outside the unit tube around graph(f)", out.distance);
  return out;
}

// Central differences of q -> pi(q) with step h; the denominators are the
// actual floating-point spans so a flat graph gives the identity exactly.
inline Eigen::MatrixXd projection_jacobian(const AmbientModel& m, std::span<const double> q, double h = 1e-4) {
  const int d = m.j() + 1;
  Eigen::MatrixXd jac(d, d);
  std::vector<double> plus(q.begin(), q.end()), minus(q.begin(), q.end());
  for (int c = 0; c < d; ++c) {
    plus[c] = q[c] + h;
    minus[c] = q[c] - h;
    const Projection a = nearest_point_projection(m, plus);
    const Projection b = nearest_point_projection(m, minus);
    jac.col(c) = (a.point - b.point) / (plus[c] - minus[c]);
    plus[c] = q[c];
    minus[c] = q[c];
  }
  return jac;
}

// Tangent frame of graph(f) over base b, columns e_i + d_i f e_t.
inline Frame graph_tangent(const AmbientModel& m, const Eigen::VectorXd& b) {
  const int j = m.j();
  const Eigen::VectorXd g = m.gradient(std::span<const double>(b.data(), j));
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(j + 1, j);
  for (int i = 0; i < j; ++i) {
    v(i, i) = 1.0;
    v(j, i) = g[i];
  }
  return Frame(std::move(v));
}

struct PulledBackForm {
  Form form{0, 1};  // j-form on N x S^1
  double norm = 0.0;  // w, in the flat metric h + dt^2
  Eigen::MatrixXd jacobian;
  Projection projection;
};

inline PulledBackForm pullback_volume_form(const AmbientModel& m, std::span<const double> q, double h = 1e-4) {
  const int d = m.j() + 1;
  const auto flat = BlockMetric::flat(d);
  PulledBackForm out;
  out.projection = nearest_point_projection(m, q);
  const Form omega = dual_form(simple_from_frame(graph_tangent(m, out.projection.base), flat), flat);
  out.jacobian = projection_jacobian(m, q, h);
  out.form = pullback(omega, out.jacobian);
  out.norm = flat.norm(out.form);
  return out;
}

struct CalibrationAtPoint {
  Form x_part{0, 1};  // dx_1..dx_k ^ nu
  Form y_part{0, 1};  // dy_1..dy_k ^ pi* omega
  Form phi{0, 1};
  BlockMetric metric{std::vector<double>{1.0}};
  double w = 1.0;
};

namespace detail {

inline std::vector<int> axis_range(int first, int count) {
  std::vector<int> v(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) v[i] = first + i;
  return v;
}

}  // namespace detail

// phi and g at the ambient point z (dimension 2k + j + 1). Only the (p, t)
// part of z matters.
inline CalibrationAtPoint build_calibration_and_metric(const AmbientModel& m, std::span<const double> z) {
  const int dim = m.dim();
  if (static_cast<int>(z.size()) != dim) throw std::invalid_argument("ambient point has the wrong dimension");
  const int k = m.k();
  const int j = m.j();
  const PulledBackForm pb = pullback_volume_form(m, z.subspan(2 * k, j + 1));
  if (!(pb.norm > 0.0) || !std::isfinite(pb.norm)) throw SingularMetricError("pulled-back volume form vanishes");
  CalibrationAtPoint out;
  out.w = pb.norm;
  const Form dx = Form::basis(dim, detail::axis_range(m.x_axis(0), k));
  const Form dy = Form::basis(dim, detail::axis_range(m.y_axis(0), k));
  const Form nu = Form::basis(dim, detail::axis_range(m.p_axis(0), j));
  out.x_part = wedge(dx, nu);
  out.y_part = wedge(dy, embed(pb.form, dim, m.p_axis(0)));
  out.phi = out.x_part + out.y_part;
  std::vector<double> weights(static_cast<std::size_t>(dim), 1.0);
  if (!m.params().corrupt_metric) weights[m.x_axis(0)] = 1.0 / (out.w * out.w);
  const double block = std::pow(out.w, 2.0 / j);
  for (int a = m.p_axis(0); a <= m.t_axis(); ++a) weights[a] = block;
  out.metric = BlockMetric(std::move(weights));
  return out;
}

// Largest sampled radius r for which every normal offset of length r from a
// graph point projects back to that point at distance r. The nearest point
// is found independently by a grid scan over the base plus Newton.
inline double reach_estimate(const AmbientModel& m, int samples, std::uint64_t seed, int threads = 1) {
  const int j = m.j();
  std::vector<double> radii;
  for (int i = 1; i <= 31; ++i) radii.push_back(0.1 * i);
  radii.push_back(std::numbers::pi - 1e-6);
  const std::size_t queries = static_cast<std::size_t>(samples) * 2;
  std::vector<Eigen::VectorXd> origins(queries), normals(queries);
  for (int s = 0; s < samples; ++s) {
    auto rng = detail::make_rng(seed, 0x72656163u, static_cast<std::uint64_t>(s));
    std::uniform_real_distribution<double> u(0.0, m.rho());
    Eigen::VectorXd b(j);
    for (int a = 0; a < j; ++a) b[a] = u(rng);
    const auto jt = m.jet2(std::span<const double>(b.data(), j));
    Eigen::VectorXd nrm(j + 1);
    nrm.head(j) = -jt.grad;
    nrm[j] = 1.0;
    nrm.normalize();
    for (int sign = 0; sign < 2; ++sign) {
      origins[2 * s + sign] = b;
      normals[2 * s + sign] = sign == 0 ? nrm : Eigen::VectorXd(-nrm);
    }
  }
  double verified = 0.0;
  for (double r : radii) {
    std::vector<char> ok(queries, 0);
    detail::parallel_for(queries, threads, [&](std::size_t i) {
      const Eigen::VectorXd& b = origins[i];
      Eigen::VectorXd q(j + 1);
      q.head(j) = b;
      q[j] = m.f().value(std::span<const double>(b.data(), j));
      q += r * normals[i];
      std::vector<double> trace;
      int its = 0;
      Eigen::VectorXd direct = q.head(j);
      const bool ok_direct = m.newton(q, direct, trace, its);
      Eigen::VectorXd scanned = detail::scan_seed(m, q, r + 0.1, 1500);
      const bool ok_scan = m.newton(q, scanned, trace, its);
      Eigen::VectorXd best;
      if (ok_direct && ok_scan)
        best = m.energy(q, scanned) < m.energy(q, direct) ? scanned : direct;
      else if (ok_direct || ok_scan)
        best = ok_direct ? direct : scanned;
      else
        return;
      const double dist = std::sqrt(2.0 * m.energy(q, best));
      ok[i] = (best - b).norm() <= 1e-6 && std::abs(dist - r) <= 1e-6;
    });
    if (std::find(ok.begin(), ok.end(), 0) != ok.end()) break;
    verified = r;
  }
  return verified;
}

// Builds f, then gates the model on the reach of graph(f).
inline AmbientModel build_ambient(const ModelParams& params, DyadicCellSet set, int threads = 1) {
  AmbientModel m(params, std::move(set));
  const double r = reach_estimate(m, params.reach_samples, params.seed, threads);
  m.set_reach(r);
  if (!(r > 1.0))
    throw ReachError("graph(f) has reach " + std::to_string(r) + " <= 1; shrink epsilon", r);
  return m;
}

// ---------------------------------------------------------------------------
// Verification

struct CheckRecord {
  std::string check;
  std::vector<double> point;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::vector<double> witness;  // frame columns, concatenated, when relevant
};

struct CheckSummary {
  std::string check;
  std::size_t count = 0;
  std::size_t passed = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  bool pass() const { return count == passed; }
};

struct VerificationReport {
  std::vector<CheckRecord> records;

  void append(const std::vector<CheckRecord>& r) { records.insert(records.end(), r.begin(), r.end()); }
  bool all_pass() const {
    return std::all_of(records.begin(), records.end(), [](const CheckRecord& r) { return r.pass; });
  }

  // One row per check class in order of first appearance. "worst" is the
  // largest value for bound checks and the smallest for the reach gate.
  std::vector<CheckSummary> summary() const {
    std::vector<CheckSummary> out;
    for (const auto& r : records) {
      auto it = std::find_if(out.begin(), out.end(), [&](const CheckSummary& s) { return s.check == r.check; });
      if (it == out.end()) {
        out.push_back({r.check, 0, 0, r.value, r.tolerance});
        it = out.end() - 1;
      }
      ++it->count;
      if (r.pass) ++it->passed;
      it->worst = r.check == "reach" ? std::min(it->worst, r.value) : std::max(it->worst, r.value);
    }
    return out;
  }

  const CheckRecord* first_failure() const {
    for (const auto& r : records)
      if (!r.pass) return &r;
    return nullptr;
  }
};

struct VerifyPlan {
  int samples_sheet = 1000;
  int samples_ambient = 10000;
  int samples_optimize = 20;
  int samples_closedness = 500;
  int samples_tube = 1000;
  int restarts = 0;
  std::uint64_t seed = 1;
  int threads = 1;
  double tube_radius = 0.9;
  double tol_equality = 1e-6;
  double tol_comass = 1e-4;
  double tol_closed = 1e-4;
  double tol_halving = 1e-4;
  double closed_step = 1e-3;
};

namespace detail {

enum Stream : std::uint64_t {
  kSheetX = 0x5358,
  kSheetY = 0x5359,
  kPairs = 0x5041,
  kOptimize = 0x4f50,
  kClosed = 0x434c,
  kTube = 0x5455,
};

inline std::vector<double> to_vector(const Eigen::MatrixXd& m) { return {m.data(), m.data() + m.size()}; }

// Base points on a uniform grid with about count points.
inline Eigen::VectorXd grid_base_point(const AmbientModel& m, int count, int i) {
  const int j = m.j();
  const int per_axis = std::max(1, static_cast<int>(std::ceil(std::pow(static_cast<double>(count), 1.0 / j) - 1e-9)));
  Eigen::VectorXd b(j);
  int r = i;
  for (int a = 0; a < j; ++a) {
    b[a] = (static_cast<double>(r % per_axis) + 0.5) * m.rho() / per_axis;
    r /= per_axis;
  }
  return b;
}

// Uniform point of the tube: torus factors uniform, |t - f(p)| < radius.
inline std::vector<double> tube_point(const AmbientModel& m, std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> z(static_cast<std::size_t>(m.dim()));
  for (int b = 0; b < 2 * m.k(); ++b) z[b] = unit(rng);
  for (int a = 0; a < m.j(); ++a) z[m.p_axis(a)] = unit(rng) * m.rho();
  const double fp = m.f().value(std::span<const double>(z.data() + m.p_axis(0), m.j()));
  z[m.t_axis()] = fp + (2.0 * unit(rng) - 1.0) * radius;
  return z;
}

inline Frame gaussian_frame(int dim, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd v(dim, k);
  for (int c = 0; c < k; ++c)
    for (int i = 0; i < dim; ++i) v(i, c) = normal(rng);
  return Frame(std::move(v));
}

struct NamedForm {
  std::string name;
  Form form;
};

// The forms a check class is run against at one point.
inline std::vector<NamedForm> forms_at(const AmbientModel& m, const CalibrationAtPoint& c) {
  if (m.mode() == Mode::kStablePair) return {{"phi_x", c.x_part}, {"phi_y", c.y_part}};
  return {{"phi", c.phi}, {"phi_plus_minus", c.x_part - c.y_part}, {"phi_minus_plus", c.y_part - c.x_part}};
}

inline Frame sheet_x_frame(const AmbientModel& m) {
  std::vector<int> axes = axis_range(m.x_axis(0), m.k());
  for (int i = 0; i < m.j(); ++i) axes.push_back(m.p_axis(i));
  return Frame::coordinate(m.dim(), axes);
}

inline Frame sheet_y_frame(const AmbientModel& m, const Eigen::VectorXd& base) {
  const Frame g = graph_tangent(m, base);
  Eigen::MatrixXd v = Eigen::MatrixXd::Zero(m.dim(), m.degree());
  for (int b = 0; b < m.k(); ++b) v(m.y_axis(b), b) = 1.0;
  v.block(m.p_axis(0), m.k(), m.j() + 1, m.j()) = g.vectors();
  return Frame(std::move(v));
}

}  // namespace detail

// Sheet equalities: phi (or the sheet's own form in stable-pair mode) on the
// g-unit tangent plane of each sheet equals 1.
inline std::vector<CheckRecord> check_sheets(const AmbientModel& m, const VerifyPlan& plan) {
  const int count = plan.samples_sheet;
  std::vector<CheckRecord> out(static_cast<std::size_t>(2 * count));
  detail::parallel_for(out.size(), plan.threads, [&](std::size_t idx) {
    const bool on_y = idx >= static_cast<std::size_t>(count);
    const int i = static_cast<int>(on_y ? idx - count : idx);
    auto rng = detail::make_rng(plan.seed, on_y ? detail::kSheetY : detail::kSheetX, static_cast<std::uint64_t>(i));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const Eigen::VectorXd b = detail::grid_base_point(m, count, i);
    std::vector<double> z(static_cast<std::size_t>(m.dim()), 0.0);
    for (int c = 0; c < m.k(); ++c) z[on_y ? m.y_axis(c) : m.x_axis(c)] = unit(rng);
    for (int a = 0; a < m.j(); ++a) z[m.p_axis(a)] = b[a];
    z[m.t_axis()] = on_y ? m.f().value(std::span<const double>(b.data(), m.j())) : 0.0;
    const CalibrationAtPoint c = build_calibration_and_metric(m, z);
    const Frame plane = on_y ? detail::sheet_y_frame(m, b) : detail::sheet_x_frame(m);
    const Form& form = m.mode() == Mode::kStablePair ? (on_y ? c.y_part : c.x_part) : c.phi;
    const double v = evaluate(form, simple_from_frame(plane, c.metric));
    CheckRecord& r = out[idx];
    r.check = on_y ? "sheet_y" : "sheet_x";
    r.point = z;
    r.value = std::abs(v - 1.0);
    r.tolerance = plan.tol_equality;
    r.pass = r.value <= r.tolerance;
  });
  return out;
}

// Random (point, simple k-vector) pairs: every form stays <= 1 + tol.
inline std::vector<CheckRecord> check_pairs(const AmbientModel& m, const VerifyPlan& plan) {
  const std::size_t count = static_cast<std::size_t>(plan.samples_ambient);
  const std::size_t nforms = m.mode() == Mode::kStablePair ? 2 : 3;
  std::vector<CheckRecord> out(count * nforms);
  detail::parallel_for(count, plan.threads, [&](std::size_t i) {
    auto rng = detail::make_rng(plan.seed, detail::kPairs, i);
    const auto z = detail::tube_point(m, rng, plan.tube_radius);
    const CalibrationAtPoint c = build_calibration_and_metric(m, z);
    const auto forms = detail::forms_at(m, c);
    for (std::size_t f = 0; f < forms.size(); ++f) {
      const Frame frame = detail::gaussian_frame(m.dim(), forms[f].form.degree(), rng);
      const Frame unit = orthonormalize(frame, c.metric);
      const double v = evaluate(forms[f].form, wedge_of(unit));
      CheckRecord& r = out[f * count + i];
      r.check = "pairs_" + forms[f].name;
      r.point = z;
      r.value = v - 1.0;
      r.tolerance = plan.tol_comass;
      r.pass = r.value <= r.tolerance;
      r.witness = detail::to_vector(unit.vectors());
    }
  });
  return out;
}

// Optimizer lower bound for the comass at sampled tube points.
inline std::vector<CheckRecord> check_comass(const AmbientModel& m, const VerifyPlan& plan) {
  const std::size_t count = static_cast<std::size_t>(plan.samples_optimize);
  const std::size_t nforms = m.mode() == Mode::kStablePair ? 2 : 3;
  std::vector<CheckRecord> out(count * nforms);
  detail::parallel_for(count, plan.threads, [&](std::size_t i) {
    auto rng = detail::make_rng(plan.seed, detail::kOptimize, i);
    const auto z = detail::tube_point(m, rng, plan.tube_radius);
    const CalibrationAtPoint c = build_calibration_and_metric(m, z);
    const auto forms = detail::forms_at(m, c);
    for (std::size_t f = 0; f < forms.size(); ++f) {
      ComassOptions opt;
      opt.restarts = plan.restarts;
      opt.seed = detail::splitmix64(plan.seed ^ (i * 0x9e37u + f));
      const ComassEstimate est = comass_optimize(forms[f].form, c.metric, opt);
      CheckRecord& r = out[f * count + i];
      r.check = "comass_" + forms[f].name;
      r.point = z;
      r.value = est.lower_bound - 1.0;
      r.tolerance = plan.tol_comass;
      r.pass = r.value <= r.tolerance;
      r.witness = detail::to_vector(est.maximizer.vectors());
    }
  });
  return out;
}

// Largest coefficient of the central-difference exterior derivative.
inline double exterior_derivative_residual(const AmbientModel& m, const std::vector<double>& z, bool y_only, bool x_only,
                                           double h) {
  const int dim = m.dim();
  auto form_at = [&](const std::vector<double>& p) {
    const CalibrationAtPoint c = build_calibration_and_metric(m, p);
    if (x_only) return c.x_part;
    if (y_only) return c.y_part;
    return c.phi;
  };
  Form d(m.degree() + 1, dim);
  std::vector<double> plus = z, minus = z;
  for (int a = 0; a < dim; ++a) {
    plus[a] = z[a] + h;
    minus[a] = z[a] - h;
    Form diff = form_at(plus) - form_at(minus);
    diff *= 1.0 / (plus[a] - minus[a]);
    d += wedge(Form::basis(dim, {a}), diff);
    plus[a] = z[a];
    minus[a] = z[a];
  }
  return d.max_abs();
}

inline std::vector<CheckRecord> check_closedness(const AmbientModel& m, const VerifyPlan& plan) {
  const std::size_t count = static_cast<std::size_t>(plan.samples_closedness);
  const bool pair = m.mode() == Mode::kStablePair;
  const std::size_t nforms = pair ? 2 : 1;
  std::vector<CheckRecord> out(count * nforms);
  detail::parallel_for(count, plan.threads, [&](std::size_t i) {
    auto rng = detail::make_rng(plan.seed, detail::kClosed, i);
    const auto z = detail::tube_point(m, rng, plan.tube_radius * 0.95);
    for (std::size_t f = 0; f < nforms; ++f) {
      CheckRecord& r = out[f * count + i];
      r.check = pair ? (f == 0 ? "closed_phi_x" : "closed_phi_y") : "closed_phi";
      r.point = z;
      r.value = exterior_derivative_residual(m, z, pair && f == 1, pair && f == 0, plan.closed_step);
      r.tolerance = plan.tol_closed;
      r.pass = r.value <= r.tolerance;
    }
  });
  return out;
}

// w = 1 on the graph, and the finite-difference Jacobian of pi is stable
// under halving the step.
inline std::vector<CheckRecord> check_projection(const AmbientModel& m, const VerifyPlan& plan) {
  const std::size_t count = static_cast<std::size_t>(plan.samples_tube);
  std::vector<CheckRecord> out(2 * count);
  const int j = m.j();
  detail::parallel_for(count, plan.threads, [&](std::size_t i) {
    auto rng = detail::make_rng(plan.seed, detail::kTube, i);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<double> q(static_cast<std::size_t>(j + 1));
    for (int a = 0; a < j; ++a) q[a] = unit(rng) * m.rho();
    q[j] = m.f().value(std::span<const double>(q.data(), j));
    const PulledBackForm on_graph = pullback_volume_form(m, q);
    CheckRecord& g = out[i];
    g.check = "graph_norm";
    g.point = q;
    g.value = std::abs(on_graph.norm - 1.0);
    g.tolerance = plan.tol_equality;
    g.pass = g.value <= g.tolerance;

    q[j] += (2.0 * unit(rng) - 1.0) * plan.tube_radius;
    const Eigen::MatrixXd jh = projection_jacobian(m, q, 1e-4);
    const Eigen::MatrixXd jh2 = projection_jacobian(m, q, 0.5e-4);
    CheckRecord& r = out[count + i];
    r.check = "step_halving";
    r.point = q;
    r.value = (jh - jh2).norm() / std::max(jh2.norm(), 1e-300);
    r.tolerance = plan.tol_halving;
    r.pass = r.value <= r.tolerance;
  });
  return out;
}

struct SingularSetReport {
  DyadicCellSet detected;
  DyadicCellSet expected;
  int hausdorff = 0;  // grid cells, L-infinity
  std::vector<int> spine_dimension;  // one per detected cell
};

// Cells where f vanishes (|f| <= tol at the centre), placed at
// x = y = 0, t = 0, with the spine from the two sheet tangents.
inline SingularSetReport extract_singular_set(const AmbientModel& m, double tol = 0.0) {
  SingularSetReport rep{zero_set(m.f(), m.set().depth(), tol), m.set(), 0, {}};
  rep.hausdorff = hausdorff_cells(rep.detected, rep.expected);
  const Frame x_frame = detail::sheet_x_frame(m);
  rep.spine_dimension.reserve(rep.detected.size());
  for (std::size_t i = 0; i < rep.detected.size(); ++i) {
    const auto c = rep.detected.cell_center(rep.detected.cell(i));
    Eigen::VectorXd b(m.j());
    for (int a = 0; a < m.j(); ++a) b[a] = c[a];
    rep.spine_dimension.push_back(intersection_dimension(x_frame, detail::sheet_y_frame(m, b)));
  }
  return rep;
}

inline std::vector<CheckRecord> singular_set_records(const AmbientModel& m, const SingularSetReport& rep) {
  std::vector<CheckRecord> out;
  CheckRecord h;
  h.check = "singular_set";
  h.value = rep.hausdorff;
  h.tolerance = 1.0;
  h.pass = rep.hausdorff <= 1;
  out.push_back(h);
  for (std::size_t i = 0; i < rep.detected.size(); ++i) {
    CheckRecord r;
    r.check = "spine";
    const auto c = rep.detected.cell_center(rep.detected.cell(i));
    r.point.assign(static_cast<std::size_t>(m.dim()), 0.0);
    for (int a = 0; a < m.j(); ++a) r.point[m.p_axis(a)] = c[a];
    r.value = std::abs(rep.spine_dimension[i] - m.j());
    r.tolerance = 0.0;
    r.pass = r.value == 0.0;
    out.push_back(r);
  }
  return out;
}

inline CheckRecord reach_record(const AmbientModel& m) {
  CheckRecord r;
  r.check = "reach";
  r.value = m.reach();
  r.tolerance = 1.0;
  r.pass = m.reach() > 1.0;
  return r;
}

// Every pointwise check on the model. In stable-pair mode each sheet is
// tested against its own form and the comass checks run per form.
inline VerificationReport verify_calibration(const AmbientModel& m, const VerifyPlan& plan) {
  VerificationReport rep;
  rep.append(check_sheets(m, plan));
  rep.append(check_pairs(m, plan));
  rep.append(check_comass(m, plan));
  rep.append(check_closedness(m, plan));
  rep.append(check_projection(m, plan));
  rep.append(singular_set_records(m, extract_singular_set(m)));
  if (!std::isnan(m.reach())) rep.records.push_back(reach_record(m));
  return rep;
}

// Stable-pair verification: the same sweep, requiring j = n - 1.
inline VerificationReport stable_pair_mode(const AmbientModel& m, const VerifyPlan& plan) {
  if (m.mode() != Mode::kStablePair) throw std::invalid_argument("model was not built in stable-pair mode");
  return verify_calibration(m, plan);
}

}  // namespace caldesing
