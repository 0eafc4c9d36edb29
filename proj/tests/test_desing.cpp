#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "caldesing/desing.hpp"
#include "caldesing/fractal.hpp"

using namespace caldesing;

namespace {

DyadicCellSet small_cantor(int depth = 2) {
  CantorSpec spec;
  spec.ratio = 0.25;
  spec.depth = depth;
  spec.offset = 1.5;
  return cantor_generate(spec, 4.0);
}

ModelParams params(double epsilon) {
  ModelParams p;
  p.epsilon = epsilon;
  p.reach_samples = 8;
  return p;
}

VerifyPlan light_plan() {
  VerifyPlan plan;
  plan.samples_sheet = 40;
  plan.samples_ambient = 300;
  plan.samples_optimize = 3;
  plan.samples_closedness = 10;
  plan.samples_tube = 20;
  return plan;
}

// Nearest graph point by a dense scan of the base over [q0 - 1.5, q0 + 1.5].
double brute_distance(const AmbientModel& m, double p, double t) {
  const int n = 300001;
  double best = std::numeric_limits<double>::infinity();
  Eigen::VectorXd q(2), b(1);
  q << p, t;
  for (int i = 0; i < n; ++i) {
    b[0] = p - 1.5 + 3.0 * i / (n - 1);
    best = std::min(best, m.energy(q, b));
  }
  return std::sqrt(2.0 * best);
}

}  // namespace

TEST(Desing, ParamsAreValidated) {
  ModelParams p;
  p.j = 2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p.mode = Mode::kStablePair;
  EXPECT_NO_THROW(p.validate());
  p.epsilon = -1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_THROW(AmbientModel(params(1e-3), DyadicCellSet(2, 4.0, 4)), std::invalid_argument);
  EXPECT_THROW(AmbientModel(params(1e-3), DyadicCellSet(1, 1.0, 4)), std::invalid_argument);
}

TEST(Desing, ProjectionMatchesBruteForce) {
  const AmbientModel m(params(1.0), small_cantor());
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 4.0), v(-0.9, 0.9);
  for (int i = 0; i < 20; ++i) {
    const double p = u(rng);
    const double t = m.f().value(std::vector<double>{p}) + v(rng);
    const Projection pr = nearest_point_projection(m, std::vector<double>{p, t});
    EXPECT_NEAR(pr.distance, brute_distance(m, p, t), 1e-8) << p << ' ' << t;
    EXPECT_NEAR(pr.point[1], m.f().value(std::vector<double>{pr.base[0]}), 0.0);
  }
}

TEST(Desing, FlatGraphReducesToTheTorusForm) {
  const AmbientModel m(params(1e-3), DyadicCellSet::full(1, 4.0, 3));
  ASSERT_TRUE(m.f().identically_zero());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 10; ++i) {
    std::vector<double> z(m.dim());
    for (double& c : z) c = u(rng);
    z[m.p_axis(0)] *= 4.0;
    z[m.t_axis()] = 1.8 * u(rng) - 0.9;
    const CalibrationAtPoint c = build_calibration_and_metric(m, z);
    EXPECT_EQ(c.w, 1.0);
    const Form expected = Form::basis(6, {0, 1, 4}) + Form::basis(6, {2, 3, 4});
    EXPECT_EQ(c.phi, expected);
    for (int a = 0; a < m.dim(); ++a) EXPECT_EQ(c.metric.weight(a), 1.0);
  }
}

TEST(Desing, PointsOutsideTheTubeAreRejected) {
  const AmbientModel m(params(1e-3), DyadicCellSet::full(1, 4.0, 3));
  EXPECT_THROW(nearest_point_projection(m, std::vector<double>{1.0, 1.5}), OutOfDomainError);
  EXPECT_NO_THROW(nearest_point_projection(m, std::vector<double>{1.0, 0.99}));
  EXPECT_THROW(nearest_point_projection(m, std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Desing, GraphNormIsOneOnTheGraph) {
  const AmbientModel m(params(1.0), small_cantor());
  for (double p : {0.3, 1.0, 2.2, 3.6}) {
    const double t = m.f().value(std::vector<double>{p});
    EXPECT_NEAR(pullback_volume_form(m, std::vector<double>{p, t}).norm, 1.0, 1e-8);
  }
}

TEST(Desing, ModelPassesAllChecks) {
  const AmbientModel m = build_ambient(params(1e-3), small_cantor());
  EXPECT_GT(m.reach(), 1.0);
  const auto rep = verify_calibration(m, light_plan());
  for (const auto& s : rep.summary()) EXPECT_TRUE(s.pass()) << s.check << " worst " << s.worst;
  EXPECT_EQ(rep.first_failure(), nullptr);
}

TEST(Desing, SingularSetAndSpine) {
  const AmbientModel m(params(1e-3), small_cantor());
  const auto rep = extract_singular_set(m);
  EXPECT_EQ(rep.detected, m.set());
  EXPECT_EQ(rep.hausdorff, 0);
  for (int d : rep.spine_dimension) EXPECT_EQ(d, m.j());
}

TEST(Desing, SheetsTouchOnlyOverTheSet) {
  const AmbientModel m(params(1e-3), small_cantor());
  // The planes share the base direction exactly where df vanishes.
  const Eigen::VectorXd inside = Eigen::VectorXd::Constant(1, m.set().cell_center(m.set().cell(0))[0]);
  EXPECT_EQ(intersection_dimension(detail::sheet_x_frame(m), detail::sheet_y_frame(m, inside)), m.j());
  const Eigen::VectorXd outside = Eigen::VectorXd::Constant(1, 0.5);
  EXPECT_EQ(intersection_dimension(detail::sheet_x_frame(m), detail::sheet_y_frame(m, outside)), 0);
}

TEST(Desing, CorruptedMetricBreaksTheBound) {
  ModelParams p = params(1.0);
  p.corrupt_metric = true;
  const AmbientModel m(p, small_cantor());
  std::mt19937_64 rng(6);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto z = detail::tube_point(m, rng, 0.9);
    const CalibrationAtPoint c = build_calibration_and_metric(m, z);
    worst = std::max(worst, evaluate(c.phi, simple_from_frame(detail::sheet_x_frame(m), c.metric)));
  }
  EXPECT_GT(worst, 1.0 + 1e-4);

  ModelParams ok = params(1.0);
  const AmbientModel good(ok, small_cantor());
  std::mt19937_64 rng2(6);
  for (int i = 0; i < 200; ++i) {
    const auto z = detail::tube_point(good, rng2, 0.9);
    const CalibrationAtPoint c = build_calibration_and_metric(good, z);
    EXPECT_NEAR(evaluate(c.phi, simple_from_frame(detail::sheet_x_frame(good), c.metric)), 1.0, 1e-12);
  }
}

TEST(Desing, StablePairChecksEachSheetAgainstItsOwnForm) {
  ModelParams p = params(1e-3);
  p.n = 3;
  p.j = 2;
  p.mode = Mode::kStablePair;
  const auto k = product_with_point(small_cantor(), 1);
  const AmbientModel m = build_ambient(p, k);
  VerifyPlan plan = light_plan();
  plan.samples_ambient = 100;
  plan.samples_closedness = 4;
  plan.samples_tube = 6;
  const auto rep = stable_pair_mode(m, plan);
  std::set<std::string> names;
  for (const auto& s : rep.summary()) {
    names.insert(s.check);
    EXPECT_TRUE(s.pass()) << s.check << " worst " << s.worst;
  }
  EXPECT_TRUE(names.count("comass_phi_x"));
  EXPECT_TRUE(names.count("closed_phi_y"));
  EXPECT_FALSE(names.count("comass_phi"));
  EXPECT_THROW(stable_pair_mode(AmbientModel(params(1e-3), small_cantor()), plan), std::invalid_argument);
}

TEST(Desing, ReachOfANearlyFlatGraphIsCappedByTheCircle) {
  const AmbientModel m(params(1e-3), small_cantor());
  EXPECT_NEAR(reach_estimate(m, 4, 1), std::numbers::pi - 1e-6, 1e-9);
}

TEST(Desing, ReachGateRejectsStronglyCurvedGraphs) {
  EXPECT_THROW(build_ambient(params(3000.0), small_cantor()), ReachError);
}
