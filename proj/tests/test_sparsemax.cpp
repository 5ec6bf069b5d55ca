#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "carel/sparsemax.hpp"
#include "test_oracles.hpp"

namespace carel {
namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

TEST(SparsemaxTest, WorkedValues) {
  EXPECT_TRUE(sparsemax(vec({0.5, 0.5})).isApprox(vec({0.5, 0.5}), 1e-15));
  const Vector a = sparsemax(vec({2.0, 1.0}));
  EXPECT_EQ(a(0), 1.0);
  EXPECT_EQ(a(1), 0.0);
  const Vector b = sparsemax(vec({0.5, 0.4}));
  EXPECT_NEAR(b(0), 0.55, 1e-15);
  EXPECT_NEAR(b(1), 0.45, 1e-15);
}

TEST(SparsemaxTest, MatchesProjectionOraclesOnRandomVectors) {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(2, 16);
  std::normal_distribution<double> n(0.0, 1.5);
  for (int t = 0; t < 1000; ++t) {
    Vector v(len(rng));
    for (Index i = 0; i < v.size(); ++i) v(i) = n(rng);
    const Vector p = sparsemax(v);
    EXPECT_GE(p.minCoeff(), 0.0);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_LE((p - oracle::simplex_projection_sort(v)).lpNorm<Eigen::Infinity>(), 1e-12);
    EXPECT_LE((p - oracle::simplex_projection_bisect(v)).lpNorm<Eigen::Infinity>(), 1e-9);
  }
}

TEST(SparsemaxTest, ShiftInvariant) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 100; ++t) {
    const Vector v = oracle::random_matrix(6, 1, rng);
    EXPECT_LE((sparsemax(v) - sparsemax((v.array() + 3.7).matrix())).lpNorm<Eigen::Infinity>(), 1e-12);
  }
}

TEST(SparsemaxTest, RejectsBadInput) {
  EXPECT_THROW(sparsemax(Vector(0)), DomainError);
  EXPECT_THROW(sparsemax(vec({1.0, NAN})), DomainError);
}

TEST(SparsemaxTest, BackwardMatchesFiniteDifferences) {
  const Vector v = vec({0.9, 0.7, -0.4, 0.65});
  const Vector w = vec({0.3, -1.2, 0.8, 2.0});
  const Vector g = sparsemax_backward(sparsemax(v), w);
  for (Index i = 0; i < v.size(); ++i) {
    Vector up = v, dn = v;
    up(i) += 1e-7;
    dn(i) -= 1e-7;
    EXPECT_NEAR(g(i), (w.dot(sparsemax(up)) - w.dot(sparsemax(dn))) / 2e-7, 1e-6);
  }
}

TEST(AdapterAttendTest, SingleKeyReturnsIt) {
  const Matrix h = (Matrix(1, 3) << 0.2, -1.0, 4.0).finished();
  EXPECT_TRUE(adapter_attend(h, vec({5.0, -3.0, 1.0})).isApprox(h.row(0).transpose()));
}

TEST(AdapterAttendTest, ScoresTwoAndOneSelectFirstValue) {
  // Keys chosen so that the scaled scores are exactly [2, 1].
  const double s = std::sqrt(2.0);
  Matrix h(2, 2);
  h << 2.0 * s, 0.0, 1.0 * s, 0.0;
  const Vector out = adapter_attend(h, vec({1.0, 0.0}));
  EXPECT_TRUE(out.isApprox(h.row(0).transpose(), 1e-15));
}

TEST(AdapterAttendTest, EqualScoresGiveUniformMixture) {
  Matrix h(3, 2);
  h << 1.0, 0.0, 1.0, 5.0, 1.0, -2.0;
  const Vector out = adapter_attend(h, vec({1.0, 0.0}));
  EXPECT_TRUE(out.isApprox(h.colwise().mean().transpose(), 1e-14));
}

TEST(AdapterAttendTest, DimensionMismatch) {
  EXPECT_THROW(adapter_attend(Matrix::Ones(2, 3), vec({1.0, 2.0})), DomainError);
}

}  // namespace
}  // namespace carel
