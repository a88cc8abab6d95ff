// SPDX-FileCopyrightText: © 2026 The spop Authors
//
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "spop/linalg.hpp"
#include "spop/mat_io.hpp"
#include "spop/matrix.hpp"
#include "test_util.hpp"

namespace spop {
namespace {

using test::orthonormality_error;
using test::rel_fro;

TEST(Matrix, ConstructorValidatesLengthAndFiniteness) {
  EXPECT_THROW(Matrix(2, 2, {1.0, 2.0, 3.0}), ShapeError);
  EXPECT_THROW(Matrix(1, 2, {1.0, std::numeric_limits<double>::quiet_NaN()}), NumericError);
  EXPECT_THROW(Matrix(1, 1, {std::numeric_limits<double>::infinity()}), NumericError);
  const Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
}

TEST(Matrix, ProductsAgreeWithNaiveTripleLoop) {
  std::mt19937_64 rng(1);
  const Matrix a = Matrix::random_normal(5, 7, rng);
  const Matrix b = Matrix::random_normal(7, 4, rng);
  Matrix naive(5, 4);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 4; ++j)
      for (std::size_t k = 0; k < 7; ++k) naive(i, j) += a(i, k) * b(k, j);
  EXPECT_LT(max_abs(matmul(a, b) - naive), 1e-13);
  EXPECT_LT(max_abs(matmul_tn(a.transpose(), b) - naive), 1e-13);
  EXPECT_LT(max_abs(matmul_nt(a, b.transpose()) - naive), 1e-13);
  const Matrix g = gram(a);
  EXPECT_LT(max_abs(g - matmul_tn(a, a)), 1e-13);
  EXPECT_TRUE(g == g.transpose());
}

TEST(Matrix, ShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  Matrix a(2, 2);
  EXPECT_THROW(a += Matrix(2, 3), ShapeError);
}

TEST(Svd, IdentityHasUnitSingularValues) {
  const auto s = svd(Matrix::identity(3));
  EXPECT_EQ(s.sigma, (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Svd, DiagonalWithZeroKeepsIdentityColumns) {
  const auto s = svd(Matrix::diag({3.0, 0.0}));
  EXPECT_EQ(s.sigma, (std::vector<double>{3.0, 0.0}));
  EXPECT_EQ(s.u, Matrix::identity(2));
  EXPECT_EQ(s.v, Matrix::identity(2));
}

TEST(Svd, RandomFiveByThreeReconstructs) {
  std::mt19937_64 rng(2);
  const Matrix m = Matrix::random_normal(5, 3, rng);
  const auto s = svd(m);
  EXPECT_LT(rel_fro(compose(s, s.sigma), m), 1e-10);
}

TEST(Svd, InvariantsOnRandomShapes) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> dim(1, 20);
  for (int trial = 0; trial < 60; ++trial) {
    const Matrix m = Matrix::random_normal(dim(rng), dim(rng), rng);
    const auto s = svd(m);
    const std::size_t r = std::min(m.rows(), m.cols());
    ASSERT_EQ(s.sigma.size(), r);
    EXPECT_EQ(s.u.rows(), m.rows());
    EXPECT_EQ(s.v.rows(), m.cols());
    for (std::size_t i = 0; i + 1 < r; ++i) EXPECT_GE(s.sigma[i], s.sigma[i + 1]);
    EXPECT_GE(s.sigma.back(), 0.0);
    EXPECT_LT(orthonormality_error(s.u), 1e-8);
    EXPECT_LT(orthonormality_error(s.v), 1e-8);
    EXPECT_LT(rel_fro(compose(s, s.sigma), m), 1e-8);
  }
}

TEST(Svd, RankDeficientInputCompletesBasisAndClampsZeros) {
  std::mt19937_64 rng(4);
  const Matrix a = Matrix::random_normal(8, 2, rng);
  const Matrix b = Matrix::random_normal(2, 6, rng);
  const Matrix m = matmul(a, b);  // rank 2
  const auto s = svd(m);
  for (std::size_t i = 2; i < s.sigma.size(); ++i) EXPECT_EQ(s.sigma[i], 0.0);
  EXPECT_LT(orthonormality_error(s.u), 1e-8);
  EXPECT_LT(orthonormality_error(s.v), 1e-8);
  EXPECT_LT(rel_fro(compose(s, s.sigma), m), 1e-10);
}

TEST(Svd, SignConventionMakesFirstEntryPositive) {
  std::mt19937_64 rng(5);
  const Matrix m = Matrix::random_normal(6, 4, rng);
  const auto s = svd(m);
  for (std::size_t k = 0; k < 4; ++k) {
    std::size_t i = 0;
    while (std::abs(s.u(i, k)) <= 1e-12) ++i;
    EXPECT_GT(s.u(i, k), 0.0);
  }
  Matrix flipped = m;
  flipped *= -1.0;
  const auto sf = svd(flipped);
  EXPECT_LT(max_abs(sf.u - s.u), 1e-12);
  EXPECT_LT(max_abs(sf.v + s.v), 1e-12);
}

TEST(Svd, Deterministic) {
  std::mt19937_64 rng(6);
  const Matrix m = Matrix::random_normal(9, 7, rng);
  const auto a = svd(m);
  const auto b = svd(m);
  EXPECT_TRUE(a.u == b.u);
  EXPECT_TRUE(a.v == b.v);
  EXPECT_EQ(a.sigma, b.sigma);
}

TEST(Svd, ZeroMatrix) {
  const auto s = svd(Matrix(3, 2));
  EXPECT_EQ(s.sigma, (std::vector<double>{0.0, 0.0}));
  EXPECT_LT(orthonormality_error(s.u), 1e-12);
  EXPECT_LT(orthonormality_error(s.v), 1e-12);
}

TEST(Svd, SweepCapRaisesConvergenceError) {
  std::mt19937_64 rng(7);
  const Matrix m = Matrix::random_normal(10, 10, rng);
  try {
    (void)svd(m, {.max_sweeps = 1, .tol = 1e-12});
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_NE(std::string(e.what()).find("svd did not converge"), std::string::npos);
  }
}

TEST(EigSym, IdentityAndDiagonal) {
  EXPECT_EQ(eig_sym(Matrix::identity(4)), (std::vector<double>{1, 1, 1, 1}));
  EXPECT_EQ(eig_sym(Matrix::diag({9.0, 4.0, 1.0})), (std::vector<double>{9, 4, 1}));
  EXPECT_EQ(eig_sym(Matrix::diag({1.0, 9.0, 4.0})), (std::vector<double>{9, 4, 1}));
}

TEST(EigSym, GramEigenvaluesAreSquaredSingularValues) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix w = Matrix::random_normal(6, 4, rng);
    const auto eig = eig_sym(gram(w));
    const auto sigma = singular_values(w);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(eig[i], sigma[i] * sigma[i], 1e-9 * eig[i]);
  }
}

TEST(EigSym, VectorsDiagonalize) {
  std::mt19937_64 rng(9);
  const Matrix x = gram(Matrix::random_normal(12, 7, rng));
  const auto e = eigh(x);
  EXPECT_LT(orthonormality_error(e.vectors), 1e-10);
  const Matrix back = matmul(matmul(e.vectors, Matrix::diag(7, 7, e.values)), e.vectors.transpose());
  EXPECT_LT(rel_fro(back, x), 1e-10);
}

TEST(EigSym, RejectsAsymmetricAndNonSquare) {
  EXPECT_THROW(eig_sym(Matrix{{1.0, 2.0}, {0.0, 1.0}}), DomainError);
  EXPECT_THROW(eig_sym(Matrix(2, 3)), ShapeError);
}

TEST(SchattenNorm, DiagonalExamples) {
  const Matrix d = Matrix::diag({3.0, 4.0});
  EXPECT_NEAR(schatten_norm(d, 2.0), 5.0, 1e-14);
  EXPECT_EQ(schatten_norm(d, kInf), 4.0);
  EXPECT_NEAR(schatten_norm(d, 1.0), 7.0, 1e-14);
}

TEST(SchattenNorm, RejectsQBelowOne) {
  EXPECT_THROW(schatten_norm(Matrix::identity(2), 0.5), DomainError);
  EXPECT_THROW(schatten_norm(Matrix::identity(2), std::nan("")), DomainError);
}

TEST(SchattenNorm, FrobeniusMatchesEntrywiseSum) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix m = Matrix::random_normal(1 + trial % 7, 1 + trial % 5, rng);
    double sum = 0.0;
    for (double x : m.data()) sum += x * x;
    EXPECT_NEAR(schatten_norm(m, 2.0), std::sqrt(sum), 1e-12 * std::sqrt(sum));
  }
}

TEST(SchattenNorm, VonNeumannTraceInequality) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix a = Matrix::random_normal(4, 3, rng);
    const Matrix b = Matrix::random_normal(4, 3, rng);
    const auto sa = singular_values(a);
    const auto sb = singular_values(b);
    double bound = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) bound += sa[i] * sb[i];
    ASSERT_LE(frobenius_inner(a, b), bound + 1e-9);
  }
}

TEST(SchattenNorm, HolderOnSingularValues) {
  std::mt19937_64 rng(12);
  const double qs[] = {1.0, 1.5, 2.0, 3.0, 8.0, kInf};
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix a = Matrix::random_normal(5, 4, rng);
    const Matrix b = Matrix::random_normal(5, 4, rng);
    const double q = qs[trial % 6];
    const double pd = q == 1.0 ? kInf : (std::isinf(q) ? 1.0 : q / (q - 1.0));
    const auto sa = singular_values(a);
    const auto sb = singular_values(b);
    double lhs = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) lhs += sa[i] * sb[i];
    ASSERT_LE(lhs, schatten_norm(a, pd) * schatten_norm(b, q) * (1.0 + 1e-12));
  }
}

TEST(Mat1, RoundTripsAndRejectsCorruption) {
  std::mt19937_64 rng(13);
  const Matrix m = Matrix::random_normal(3, 5, rng);
  const std::string bytes = encode_mat1(m);
  ASSERT_EQ(bytes.size(), 8u + 16u + 15u * 8u);
  EXPECT_EQ(bytes.substr(0, 8), "SPOPMAT1");
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);  // little-endian rows
  EXPECT_TRUE(decode_mat1(bytes) == m);
  EXPECT_THROW(decode_mat1(bytes.substr(0, bytes.size() - 1)), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_mat1(bad), FormatError);
}

TEST(Mat1, Base64RoundTrip) {
  for (std::string s : std::vector<std::string>{"", "a", "ab", "abc", "abcd", std::string("\0\xff\x10", 3)})
    EXPECT_EQ(base64_decode(base64_encode(s)), s);
  EXPECT_EQ(base64_encode("foobar"), "Zm9vYmFy");
}

}  // namespace
}  // namespace spop
