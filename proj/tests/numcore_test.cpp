#include <cmath>

#include <gtest/gtest.h>

#include "g2l/numcore.hpp"

using namespace g2l;

TEST(CosineSimilarity, HandValues) {
  const Vector e1{1, 0}, e2{0, 1};
  EXPECT_DOUBLE_EQ(cosine_similarity(e1, e1), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(e1, e2), 0.0);
  EXPECT_NEAR(cosine_similarity(Vector{3, 4}, Vector{4, 3}), 0.96, 1e-15);
}

TEST(CosineSimilarity, ZeroNormIsDomainError) {
  EXPECT_THROW(cosine_similarity(Vector{0, 0}, Vector{1, 0}), DomainError);
  EXPECT_THROW(cosine_similarity(Vector{1}, Vector{1, 0}), DomainError);
}

TEST(RowSoftmax, Examples) {
  Matrix m(3, 3, 0.0);
  m(1, 0) = 2.0;
  m(1, 1) = 0.0;
  m(1, 2) = -1e300;  // effectively excluded
  m(2, 0) = 1.0 + 123.0;
  m(2, 1) = 1.0 + 123.0;
  m(2, 2) = 1.0 + 123.0;
  const Matrix s = row_softmax(m, 1.0);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(s(0, c), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(s(1, 0), 0.8807970779778824, 1e-14);
  EXPECT_NEAR(s(1, 1), 1.0 - 0.8807970779778824, 1e-14);
  EXPECT_NEAR(s(2, 0), 1.0 / 3.0, 1e-15);
}

TEST(RowSoftmax, RejectsNonPositiveTemperature) {
  EXPECT_THROW(row_softmax(Matrix(1, 2), 0.0), DomainError);
  EXPECT_THROW(row_softmax(Matrix(1, 2), -1.0), DomainError);
}

TEST(RowSoftmax, RowsSumToOneAndShiftInvariant) {
  RngStream rng(11, 0);
  for (std::size_t cols : {1u, 2u, 17u, 256u, 1024u}) {
    Matrix m = random_normal_matrix(8, cols, rng, 30.0);
    const Matrix s = row_softmax(m, 0.7);
    Matrix shifted = m;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      const double c = 100.0 * rng.normal();
      for (double& v : shifted.row(r)) v += c;
    }
    const Matrix s2 = row_softmax(shifted, 0.7);
    for (std::size_t r = 0; r < m.rows(); ++r) {
      double total = 0.0;
      for (double v : s.row(r)) {
        EXPECT_GE(v, 0.0);
        total += v;
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double a = s.data()[i], b = s2.data()[i];
      if (a > 1e-200) {
        EXPECT_LT(std::abs(a - b) / a, 1e-12);
      }
    }
  }
}

TEST(L2Normalize, Examples) {
  Matrix m(2, 2, std::vector<double>{3, 4, 1, 0});
  const Matrix n = l2_normalize_rows(m);
  EXPECT_NEAR(n(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(n(0, 1), 0.8, 1e-15);
  EXPECT_EQ(n(1, 0), 1.0);
  EXPECT_EQ(n(1, 1), 0.0);
}

TEST(L2Normalize, ZeroRowNamesIndex) {
  Matrix m(3, 2, std::vector<double>{1, 0, 0, 1, 0, 0});
  try {
    l2_normalize_rows(m);
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos);
  }
}

TEST(FiniteDiff, Quadratic) {
  Matrix x(1, 2, std::vector<double>{1, 2});
  const Matrix g = finite_diff_gradient([](const Matrix& m) { return m(0, 0) * m(0, 0) + m(0, 1) * m(0, 1); }, x);
  EXPECT_NEAR(g(0, 0), 2.0, 1e-8);
  EXPECT_NEAR(g(0, 1), 4.0, 1e-8);
}

TEST(FiniteDiff, ConstantAndProduct) {
  Matrix x(1, 2, std::vector<double>{3, 5});
  const Matrix zero = finite_diff_gradient([](const Matrix&) { return 7.0; }, x);
  for (double v : zero.data()) EXPECT_EQ(v, 0.0);
  const Matrix g = finite_diff_gradient([](const Matrix& m) { return m(0, 0) * m(0, 1); }, x);
  EXPECT_NEAR(g(0, 0), 5.0, 1e-8);
  EXPECT_NEAR(g(0, 1), 3.0, 1e-8);
}

TEST(FiniteDiff, NonFiniteIsError) {
  Matrix x(1, 1, std::vector<double>{0.0});
  EXPECT_THROW(finite_diff_gradient([](const Matrix& m) { return 1.0 / (m(0, 0) * 0.0); }, x), DomainError);
}

TEST(FiniteDiff, CubicPolynomialsMatchAnalytic) {
  RngStream rng(5, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix x = random_normal_matrix(2, 3, rng);
    Vector c(6);
    for (double& v : c) v = rng.normal();
    // f = sum_i c_i x_i^3 + x_0 x_1 x_2 - x_3^2
    auto f = [&](const Matrix& m) {
      double s = 0.0;
      for (std::size_t i = 0; i < 6; ++i) s += c[i] * std::pow(m.data()[i], 3);
      return s + m.data()[0] * m.data()[1] * m.data()[2] - m.data()[3] * m.data()[3];
    };
    Matrix analytic(2, 3);
    const auto& d = x.data();
    for (std::size_t i = 0; i < 6; ++i) analytic.data()[i] = 3.0 * c[i] * d[i] * d[i];
    analytic.data()[0] += d[1] * d[2];
    analytic.data()[1] += d[0] * d[2];
    analytic.data()[2] += d[0] * d[1];
    analytic.data()[3] -= 2.0 * d[3];
    EXPECT_LT(max_relative_error(analytic, finite_diff_gradient(f, x)), 1e-7);
  }
}

TEST(RngStream, FrozenFirstDraws) {
  RngStream rng(42, 7);
  EXPECT_EQ(rng.next_u64(), 0x0ad4ec1c83d29f3bULL);
  EXPECT_EQ(rng.next_u64(), 0x315e88180f2b1976ULL);
  EXPECT_EQ(rng.next_u64(), 0x3deadc279d9ee73aULL);
}

TEST(RngStream, IdenticalStreamsAgreeForAMillionDraws) {
  RngStream a(123, 4), b(123, 4), c(123, 5);
  bool same = true;
  std::size_t differ = 0;
  for (int i = 0; i < 1'000'000; ++i) {
    const auto va = a.next_u64();
    same = same && va == b.next_u64();
    differ += va != c.next_u64();
  }
  EXPECT_TRUE(same);
  EXPECT_GT(differ, 999'000u);
}

TEST(RngStream, UniformIndexInRangeAndRoughlyFlat) {
  RngStream rng(9, 9);
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.uniform_index(7)];
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
  EXPECT_THROW(rng.uniform_index(0), DomainError);
}

TEST(NormalizeBackward, MatchesFiniteDifferences) {
  RngStream rng(3, 3);
  Matrix y = random_normal_matrix(1, 5, rng);
  Vector up(5);
  for (double& v : up) v = rng.normal();
  auto f = [&](const Matrix& m) {
    const double n = norm(m.row(0));
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += up[i] * m(0, i) / n;
    return s;
  };
  const double len = norm(y.row(0));
  Matrix unit = l2_normalize_rows(y);
  Matrix g(1, 5);
  normalize_backward(unit.row(0), len, up, g.row(0));
  EXPECT_LT(max_relative_error(g, finite_diff_gradient(f, y)), 1e-8);
}
