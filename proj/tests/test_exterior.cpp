#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <random>

#include "caldesing/exterior.hpp"

using namespace caldesing;

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c) m(i, c) = n(rng);
  return m;
}

Form random_form(int k, int m, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Form f(k, m);
  std::vector<double> c(f.size());
  for (double& x : c) x = n(rng);
  return Form(k, m, c);
}

// phi(v_1..v_k) by the Leibniz expansion over basis blades: for each blade I,
// coefficient times det of the rows I of V.
double brute_evaluate(const Form& phi, const Eigen::MatrixXd& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    const auto idx = phi.indices(i);
    Eigen::MatrixXd sub(idx.size(), v.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) sub.row(r) = v.row(idx[r]);
    s += phi[i] * sub.determinant();
  }
  return s;
}

}  // namespace

TEST(Exterior, BasisReorderingCarriesPermutationSign) {
  const Form a = Form::basis(4, {2, 0, 1});
  EXPECT_DOUBLE_EQ(a.coefficient({0, 1, 2}), 1.0);  // (2,0,1) is an even permutation
  const Form b = Form::basis(4, {1, 0});
  EXPECT_DOUBLE_EQ(b.coefficient({0, 1}), -1.0);
  EXPECT_TRUE(Form::basis(4, {1, 1}).is_zero());
  EXPECT_THROW(Form::basis(3, {3}), std::invalid_argument);
}

TEST(Exterior, WedgeIsGradedCommutativeAndAssociative) {
  std::mt19937_64 rng(3);
  const Form a = random_form(1, 5, rng), b = random_form(2, 5, rng), c = random_form(1, 5, rng);
  const Form ab = wedge(a, b), ba = wedge(b, a);
  for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_NEAR(ab[i], ba[i], 1e-12);  // (-1)^(1*2) = +1
  const Form ac = wedge(a, c), ca = wedge(c, a);
  for (std::size_t i = 0; i < ac.size(); ++i) EXPECT_NEAR(ac[i], -ca[i], 1e-12);
  EXPECT_TRUE(wedge(a, a).max_abs() < 1e-15);
  const Form l = wedge(wedge(a, b), c), r = wedge(a, wedge(b, c));
  for (std::size_t i = 0; i < l.size(); ++i) EXPECT_NEAR(l[i], r[i], 1e-12);
}

TEST(Exterior, WedgeRejectsMismatchedShapes) {
  EXPECT_THROW(wedge(Form::basis(3, {0}), Form::basis(4, {0})), std::invalid_argument);
  EXPECT_THROW(wedge(Form::basis(3, {0, 1}), Form::basis(3, {0, 2})), std::invalid_argument);
}

TEST(Exterior, EvaluationMatchesDeterminantExpansion) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 3 + trial % 6;
    const int k = 1 + trial % 3;
    const Form phi = random_form(k, m, rng);
    const Eigen::MatrixXd v = random_matrix(m, k, rng);
    EXPECT_NEAR(evaluate(phi, wedge_of(Frame(v))), brute_evaluate(phi, v), 1e-10);
  }
}

TEST(Exterior, InteriorProductInsertsFirstSlot) {
  std::mt19937_64 rng(7);
  const Form phi = random_form(3, 6, rng);
  const Eigen::MatrixXd v = random_matrix(6, 3, rng);
  const Eigen::VectorXd v0 = v.col(0);
  const Form contracted = interior(phi, std::span<const double>(v0.data(), 6));
  EXPECT_NEAR(brute_evaluate(contracted, v.rightCols(2)), brute_evaluate(phi, v), 1e-10);
}

TEST(Exterior, PullbackComposesWithTheLinearMap) {
  std::mt19937_64 rng(11);
  const Form phi = random_form(2, 5, rng);
  const Eigen::MatrixXd a = random_matrix(5, 3, rng);
  const Eigen::MatrixXd v = random_matrix(3, 2, rng);
  EXPECT_NEAR(brute_evaluate(pullback(phi, a), v), brute_evaluate(phi, a * v), 1e-10);
}

TEST(Exterior, SimpleNormIsSquareRootOfGramDeterminant) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd v = random_matrix(6, 3, rng);
    std::vector<double> w(6);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (double& x : w) x = u(rng);
    const BlockMetric g(w);
    const Eigen::MatrixXd gm = Eigen::VectorXd::Map(w.data(), 6).asDiagonal();
    const double gram = (v.transpose() * gm * v).determinant();
    EXPECT_NEAR(g.norm(wedge_of(Frame(v))), std::sqrt(gram), 1e-9 * std::sqrt(gram));
  }
}

TEST(Exterior, OrthonormalizeGivesUnitGramUnderTheMetric) {
  std::mt19937_64 rng(17);
  const Eigen::MatrixXd v = random_matrix(5, 3, rng);
  const BlockMetric g({0.5, 2.0, 1.0, 4.0, 0.25});
  const Frame q = orthonormalize(Frame(v), g);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) EXPECT_NEAR(g.inner(q.vector(a), q.vector(b)), a == b ? 1.0 : 0.0, 1e-12);
  // Same oriented plane: the wedge differs by a positive factor.
  const double ratio = evaluate(Form::basis(5, {0, 1, 2}), wedge_of(q)) /
                       evaluate(Form::basis(5, {0, 1, 2}), wedge_of(Frame(v)));
  EXPECT_GT(ratio, 0.0);
  Eigen::MatrixXd bad = v;
  bad.col(2) = bad.col(0) + 2.0 * bad.col(1);
  EXPECT_THROW(orthonormalize(Frame(bad), g), DegenerateFrameError);
}

TEST(Exterior, DualFormPairsToSquaredNorm) {
  std::mt19937_64 rng(19);
  const BlockMetric g({1.5, 0.5, 2.0, 3.0});
  const Multivector xi = wedge_of(Frame(random_matrix(4, 2, rng)));
  const double n = g.norm(xi);
  EXPECT_NEAR(evaluate(dual_form(xi, g), xi), n * n, 1e-10);
  EXPECT_NEAR(g.norm(dual_form(xi, g)), n, 1e-10);
}

TEST(Exterior, FormNormUsesInverseWeights) {
  const BlockMetric g({4.0, 9.0, 1.0});
  EXPECT_NEAR(g.norm(Form::basis(3, {0, 1})), 1.0 / 6.0, 1e-15);
  EXPECT_NEAR(g.norm(Multivector::basis(3, {0, 1})), 6.0, 1e-15);
  EXPECT_THROW(BlockMetric({1.0, 0.0}), std::invalid_argument);
  EXPECT_THROW(BlockMetric({1.0, -2.0}), std::invalid_argument);
}

TEST(Exterior, EmbedShiftsIndices) {
  const Form a = Form::basis(2, {0, 1});
  const Form e = embed(a, 5, 3);
  EXPECT_DOUBLE_EQ(e.coefficient({3, 4}), 1.0);
  EXPECT_THROW(embed(a, 4, 3), std::invalid_argument);
}

TEST(Exterior, IntersectionDimensionOfCoordinatePlanes) {
  EXPECT_EQ(intersection_dimension(Frame::coordinate(5, {0, 1, 2}), Frame::coordinate(5, {2, 3, 4})), 1);
  EXPECT_EQ(intersection_dimension(Frame::coordinate(5, {0, 1}), Frame::coordinate(5, {2, 3})), 0);
  EXPECT_EQ(intersection_dimension(Frame::coordinate(4, {0, 1}), Frame::coordinate(4, {1, 0})), 2);
  Eigen::MatrixXd tilted = Eigen::MatrixXd::Zero(3, 1);
  tilted(0, 0) = 1.0;
  tilted(2, 0) = 1e-3;
  EXPECT_EQ(intersection_dimension(Frame::coordinate(3, {0}), Frame(tilted)), 0);
}

TEST(Exterior, TopDegreeRejectsOverflow) {
  EXPECT_THROW(Form(4, 3), std::invalid_argument);
  EXPECT_THROW(Form(1, 13), std::invalid_argument);
  EXPECT_NO_THROW(Form(6, 12));
}
