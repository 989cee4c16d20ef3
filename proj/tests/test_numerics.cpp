#include <gtest/gtest.h>

#include <cmath>

#include "tfalt/numerics.hpp"
#include "tfalt/random.hpp"

using namespace tfalt;

namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

Vector random_vector(Rng& rng, Eigen::Index n, double scale) {
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

}  // namespace

TEST(Matvec, IdentityZeroAndHandExample) {
  EXPECT_EQ(matvec(Matrix::Identity(3, 3), vec({1, 2, 3})), vec({1, 2, 3}));
  EXPECT_EQ(matvec(Matrix::Zero(2, 2), vec({5, 7})), vec({0, 0}));
  Matrix m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_EQ(matvec(m, vec({1, 1})), vec({3, 7}));
}

TEST(Matvec, ShapeMismatchThrows) {
  try {
    matvec(Matrix::Identity(3, 3), vec({1, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape);
  }
}

TEST(L2Normalize, Examples) {
  EXPECT_EQ(l2_normalize(vec({1, 0})), vec({1, 0}));
  const Vector n = l2_normalize(vec({3, 4}));
  EXPECT_NEAR(n(0), 0.6, 1e-15);
  EXPECT_NEAR(n(1), 0.8, 1e-15);
  try {
    l2_normalize(vec({0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_vector);
  }
}

TEST(L2Normalize, UnitNormWheneverItSucceeds) {
  Rng rng(3);
  for (int t = 0; t < 500; ++t) {
    const double scale = std::pow(10.0, rng.uniform(-6, 6));
    EXPECT_NEAR(l2_normalize(random_vector(rng, 7, scale)).norm(), 1.0, 1e-12);
  }
}

TEST(CosineSim, Examples) {
  EXPECT_EQ(cosine_sim(vec({1, 0}), vec({0, 1})), 0.0);
  const Vector v = vec({0.3, -2, 5});
  EXPECT_NEAR(cosine_sim(v, v), 1.0, 1e-15);
  EXPECT_NEAR(cosine_sim(vec({1, 1}), vec({1, 0})), 0.70710678, 1e-8);
  EXPECT_THROW(cosine_sim(vec({0, 0}), vec({1, 0})), Error);
  EXPECT_THROW(cosine_sim(vec({1, 0, 0}), vec({1, 0})), Error);
}

TEST(CosineSim, SymmetricClampedAndScaleInvariant) {
  Rng rng(5);
  for (int t = 0; t < 500; ++t) {
    const Vector u = random_vector(rng, 6, 1.0);
    const Vector v = random_vector(rng, 6, 1.0);
    const double a = std::exp(rng.uniform(-5, 5));
    const double s = cosine_sim(u, v);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
    EXPECT_EQ(s, cosine_sim(v, u));
    EXPECT_NEAR(cosine_sim(Vector(a * u), v), s, 1e-12);
    const Vector unit = u.normalized();
    EXPECT_NEAR(cosine_sim(unit, unit), 1.0, 1e-12);
  }
}

TEST(Sigmoid, Examples) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_GE(sigmoid(50.0), 1.0 - 1e-20);
  EXPECT_NEAR(sigmoid(std::log(3.0)), 0.75, 1e-15);
}

TEST(Sigmoid, NoOverflowAndMonotone) {
  double prev = 0.0;
  for (double x = -1000.0; x <= 1000.0; x += 0.5) {
    const double s = sigmoid(x);
    ASSERT_TRUE(std::isfinite(s));
    ASSERT_GE(s, prev);
    prev = s;
  }
  EXPECT_GT(sigmoid(-700.0), 0.0);
}

TEST(StableSoftmax, Examples) {
  const Vector a = stable_softmax(vec({0, 0}));
  EXPECT_EQ(a, vec({0.5, 0.5}));
  const Vector b = stable_softmax(vec({std::log(2.0), 0}));
  EXPECT_NEAR(b(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(b(1), 1.0 / 3.0, 1e-15);
  const Vector c = stable_softmax(vec({1000, 0}));
  EXPECT_TRUE(c.allFinite());
  EXPECT_NEAR(c(0), 1.0, 1e-15);
  EXPECT_LT(c(1), 1e-300);
}

TEST(StableSoftmax, SumsToOneAndShiftInvariant) {
  Rng rng(9);
  for (int t = 0; t < 1000; ++t) {
    Vector z(8);
    for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.uniform(-1e3, 1e3);
    const Vector p = stable_softmax(z);
    EXPECT_NEAR(p.sum(), 1.0, 1e-9);
    EXPECT_TRUE((p.array() >= 0.0).all());
    const Vector q = stable_softmax(Vector(z.array() + 17.25));
    EXPECT_LT((p - q).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Argmax, TiesGoToLowestIndex) {
  EXPECT_EQ(argmax(vec({1, 3, 3, 2})), 1);
  EXPECT_EQ(argmax(vec({-1})), 0);
}

TEST(Rng, StreamsAreDeterministicAndDistinct) {
  Rng a = Rng::stream(42, "init");
  Rng b = Rng::stream(42, "init");
  Rng c = Rng::stream(42, "shuffle");
  const auto x = a.next_u64();
  EXPECT_EQ(x, b.next_u64());
  EXPECT_NE(x, c.next_u64());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng(1);
  double sum = 0, sum2 = 0, usum = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum2 += z * z;
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    usum += u;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum2 / n, 1.0, 0.01);
  EXPECT_NEAR(usum / n, 0.5, 0.005);
}
