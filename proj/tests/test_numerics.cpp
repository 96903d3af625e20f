#include <cmath>
#include <numeric>

#include "bmilearn/linalg.hpp"
#include "bmilearn/matrix.hpp"
#include "bmilearn/random.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bmilearn;

TEST_CASE("matrix products agree with hand-computed values") {
  const Matrix a{{1, 2}, {3, 4}, {5, 6}};
  const Matrix b{{1, 0, -1}, {2, 1, 0}};
  const Matrix ab = matmul(a, b);
  CHECK(ab == Matrix{{5, 2, -1}, {11, 4, -3}, {17, 6, -5}});
  CHECK(matmul_transposed(a, b.transposed()) == ab);
  CHECK(matvec(a, Vector{1, -1}) == Vector{-1, -1, -1});
  CHECK(matvec_transposed(a, Vector{1, 0, 1}) == Vector{6, 8});
  CHECK(trace(Matrix{{1, 9}, {9, 2}}) == 3.0);
  CHECK(frobenius_dot(a, a) == doctest::Approx(91.0));
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(a + b, ShapeError);
}

TEST_CASE("add_outer and axpy") {
  Matrix m(2, 3);
  add_outer(m, 2.0, Vector{1, -1}, Vector{1, 2, 3});
  CHECK(m == Matrix{{2, 4, 6}, {-2, -4, -6}});
  Vector y{1, 1};
  axpy(0.5, Vector{2, 4}, y);
  CHECK(y == Vector{2, 3});
}

TEST_CASE("cosine similarity of flattened matrices") {
  const Matrix a{{1, 0}, {0, 1}};
  CHECK(cosine_similarity_flat(a, a * 3.0) == doctest::Approx(1.0));
  CHECK(cosine_similarity_flat(a, -a) == doctest::Approx(-1.0));
  CHECK(cosine_similarity_flat(a, Matrix{{0, 1}, {1, 0}}) == doctest::Approx(0.0));
  CHECK_THROWS(cosine_similarity_flat(a, Matrix(2, 2)));
}

TEST_CASE("pearson correlation") {
  const Vector x{1, 2, 3, 4, 5};
  const Vector y{2, 4, 6, 8, 10};
  CHECK(pearson(x, y) == doctest::Approx(1.0));
  const Vector z{5, 4, 3, 2, 1};
  CHECK(pearson(x, z) == doctest::Approx(-1.0));
}

TEST_CASE("cholesky reproduces the matrix") {
  RandomSource rng(3);
  const Matrix g = gaussian_matrix(6, 6, 0.0, 1.0, rng);
  const Matrix s = matmul_transposed(g, g) + Matrix::identity(6) * 0.1;
  const Matrix l = cholesky(s);
  CHECK(testing::rel_err(matmul_transposed(l, l), s) < 1e-12);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) CHECK(l(i, j) == 0.0);
  CHECK_THROWS(cholesky(Matrix{{1, 2}, {2, 1}}));
}

TEST_CASE("least squares recovers a planted operator") {
  RandomSource rng(11);
  const Matrix x = gaussian_matrix(7, 40, 0.0, 1.0, rng);
  const Matrix a0 = gaussian_matrix(3, 7, 0.0, 1.0, rng);
  const Matrix y = matmul(a0, x);
  CHECK(testing::rel_err(least_squares(x, y, 0.0), a0) < 1e-8);
  const Matrix xx = matmul_transposed(x, x);
  const Matrix yx = matmul_transposed(y, x);
  CHECK(testing::rel_err(least_squares_from_moments(xx, yx, 0.0), a0) < 1e-8);
  CHECK(default_ridge(xx) == doctest::Approx(1e-6 * trace(xx) / 7.0));
}

TEST_CASE("ridge shrinks toward zero") {
  RandomSource rng(12);
  const Matrix x = gaussian_matrix(4, 30, 0.0, 1.0, rng);
  const Matrix y = matmul(gaussian_matrix(2, 4, 0.0, 1.0, rng), x);
  CHECK(frobenius_norm(least_squares(x, y, 100.0)) < frobenius_norm(least_squares(x, y, 0.0)));
}

TEST_CASE("jacobi eigensolver recovers a planted spectrum") {
  RandomSource rng(5);
  const std::size_t d = 8;
  const Matrix q = orthonormal_columns(gaussian_matrix(d, d, 0.0, 1.0, rng));
  const Vector lambda{9, 7, 5, 4, 3, 2, 1, 0.5};
  const Matrix s = matmul(matmul(q, Matrix::diagonal(lambda)), q.transposed());
  const EigenPairs e = sym_eig_topk(s, 3);
  REQUIRE(e.values.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(std::abs(e.values[i] - lambda[i]) < 1e-8);
    // Eigenvector matches the planted column up to sign.
    const Vector qi = q.col(i);
    CHECK(std::abs(std::abs(dot(e.vectors.row(i), qi)) - 1.0) < 1e-8);
  }
}

TEST_CASE("orthonormal_columns drops dependent columns") {
  const Matrix a{{1, 2, 0}, {0, 0, 1}, {0, 0, 0}};
  const Matrix q = orthonormal_columns(a);
  CHECK(q.cols() == 2);
  CHECK(testing::rel_err(matmul(q.transposed(), q), Matrix::identity(2)) < 1e-12);
}

TEST_CASE("random streams are reproducible and independent") {
  RandomSource a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  CHECK(derive_seed(1, "pretrain") != derive_seed(1, "decoder"));
  CHECK(derive_seed(1, "pretrain") == derive_seed(1, "pretrain"));
  RandomSource root(7);
  RandomSource c1 = root.child("x");
  (void)root.child("y").next_u64();
  RandomSource c2 = root.child("x");
  CHECK(c1.next_u64() == c2.next_u64());
}

TEST_CASE("gaussian and uniform draws have the right moments") {
  RandomSource rng(99);
  const std::size_t n = 200000;
  double s = 0, s2 = 0, u = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = rng.gaussian();
    s += g;
    s2 += g * g;
    u += rng.uniform();
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.01);
  CHECK(std::abs(u / n - 0.5) < 0.005);
  for (int i = 0; i < 1000; ++i) CHECK(rng.index(7) < 7);
}
