#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace sgkkt;

namespace {

LinearMap dense_map(const DenseMatrix& a) {
  return [a](const Vector& x) -> Vector { return a * x; };
}

const LinearMap identity = [](const Vector& x) -> Vector { return x; };

void expect_monotone(const std::vector<double>& h) {
  ASSERT_FALSE(h.empty());
  EXPECT_EQ(h.front(), 1.0);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1] + 1e-13) << i;
}

// Nonsymmetric but comfortably nonsingular.
DenseMatrix random_nonsymmetric(std::mt19937& rng, Index n) {
  return oracle::random_matrix(rng, n, n) + 2.0 * std::sqrt(static_cast<double>(n)) * oracle::eye(n);
}

}  // namespace

TEST(Fgmres, IdentityConvergesInOneStep) {
  const Vector b = Vector::LinSpaced(7, 1.0, 3.0);
  const auto [x, rep] = fgmres(identity, identity, b, FgmresConfig{});
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 1);
  EXPECT_LE((x - b).norm(), 1e-14 * b.norm());
}

TEST(Fgmres, ExactPreconditionerConvergesInOneStep) {
  std::mt19937 rng(11);
  const DenseMatrix a = random_nonsymmetric(rng, 30);
  const Eigen::PartialPivLU<DenseMatrix> lu(a);
  const LinearMap inv = [&](const Vector& v) -> Vector { return lu.solve(v); };
  const Vector b = oracle::random_matrix(rng, 30, 1);
  const auto [x, rep] = fgmres(dense_map(a), inv, b, FgmresConfig{});
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 1);
  EXPECT_LE(rep.true_rel_residual, 1e-14);
}

TEST(Fgmres, TrueResidualMatchesRecurrenceOnSpd) {
  std::mt19937 rng(5);
  const DenseMatrix a = oracle::random_spd(rng, 50);
  const Vector b = oracle::random_matrix(rng, 50, 1);
  const auto [x, rep] = fgmres(dense_map(a), identity, b, FgmresConfig{1e-10, 200, true});
  EXPECT_TRUE(rep.converged);
  const double explicit_rel = (b - a * x).norm() / b.norm();
  EXPECT_NEAR(explicit_rel, rep.final_rel_residual, 1e-10);
  EXPECT_NEAR(rep.true_rel_residual, explicit_rel, 1e-15);
  EXPECT_LE(rep.residual_history.back(), 1e-10);
  expect_monotone(rep.residual_history);
}

TEST(Fgmres, HistoryMonotoneOnNonsymmetric) {
  std::mt19937 rng(3);
  const DenseMatrix a = random_nonsymmetric(rng, 40);
  const DenseMatrix pd = DenseMatrix(a.diagonal().cwiseInverse().asDiagonal());
  const Vector b = oracle::random_matrix(rng, 40, 1);
  const auto [x, rep] = fgmres(dense_map(a), dense_map(pd), b, FgmresConfig{1e-9, 100, true});
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(static_cast<int>(rep.residual_history.size()), rep.iterations + 1);
  expect_monotone(rep.residual_history);
  EXPECT_LE(std::abs(rep.true_rel_residual - rep.final_rel_residual), 1e-8);
}

TEST(Fgmres, VaryingPreconditionerStillConverges) {
  std::mt19937 rng(8);
  const DenseMatrix a = oracle::random_spd(rng, 25);
  int calls = 0;
  // Alternates between two different scalings of the Jacobi inverse.
  const Vector dinv = a.diagonal().cwiseInverse();
  const LinearMap varying = [&](const Vector& v) -> Vector {
    return ((++calls % 2) ? 1.0 : 0.5) * dinv.cwiseProduct(v);
  };
  const Vector b = oracle::random_matrix(rng, 25, 1);
  const auto [x, rep] = fgmres(dense_map(a), varying, b, FgmresConfig{1e-10, 100, true});
  EXPECT_TRUE(rep.converged);
  EXPECT_LE((b - a * x).norm() / b.norm(), 1e-9);
}

TEST(Fgmres, ScalingInvariance) {
  std::mt19937 rng(21);
  const DenseMatrix a = random_nonsymmetric(rng, 20);
  const Vector b = oracle::random_matrix(rng, 20, 1);
  const FgmresConfig cfg{1e-12, 100, true};
  const Vector x1 = fgmres(dense_map(a), identity, b, cfg).first;
  for (double alpha : {1e-3, 7.0, -250.0}) {
    const Vector x2 = fgmres(dense_map(a), identity, alpha * b, cfg).first;
    EXPECT_LE((x2 / alpha - x1).norm(), 1e-10 * x1.norm()) << alpha;
  }
}

TEST(Fgmres, MaxItersReportsNotConverged) {
  std::mt19937 rng(2);
  const DenseMatrix a = oracle::random_spd(rng, 30);
  const Vector b = oracle::random_matrix(rng, 30, 1);
  const auto [x, rep] = fgmres(dense_map(a), identity, b, FgmresConfig{1e-12, 3, true});
  EXPECT_FALSE(rep.converged);
  EXPECT_EQ(rep.iterations, 3);
  EXPECT_GT(rep.final_rel_residual, 1e-12);
  EXPECT_EQ(rep.residual_history.size(), 4u);
}

TEST(Fgmres, HappyBreakdownCountsAsConverged) {
  // Two distinct eigenvalues: the Krylov space is exhausted after two steps.
  Vector d(6);
  d << 1, 1, 1, 3, 3, 3;
  const DenseMatrix a = DenseMatrix(d.asDiagonal());
  const Vector b = Vector::Ones(6);
  const auto [x, rep] = fgmres(dense_map(a), identity, b, FgmresConfig{1e-300, 50, true});
  EXPECT_TRUE(rep.converged);
  EXPECT_EQ(rep.iterations, 2);
  EXPECT_LE((a * x - b).norm(), 1e-14);
}

TEST(Fgmres, WithoutHistoryKeepsEndpoints) {
  const Vector b = Vector::Ones(4);
  const auto [x, rep] = fgmres(identity, identity, b, FgmresConfig{1e-8, 10, false});
  ASSERT_EQ(rep.residual_history.size(), 2u);
  EXPECT_EQ(rep.residual_history.front(), 1.0);
  EXPECT_EQ(rep.residual_history.back(), rep.final_rel_residual);
}

TEST(Fgmres, BadInputsRejected) {
  const Vector b = Vector::Ones(3);
  EXPECT_THROW(fgmres(identity, identity, Vector::Zero(3), FgmresConfig{}), Error);
  EXPECT_THROW(fgmres(identity, identity, b, FgmresConfig{0.0, 10, true}), Error);
  EXPECT_THROW(fgmres(identity, identity, b, FgmresConfig{1.0, 10, true}), Error);
  EXPECT_THROW(fgmres(identity, identity, b, FgmresConfig{1e-8, 0, true}), Error);
}
