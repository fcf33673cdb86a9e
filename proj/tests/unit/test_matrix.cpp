#include <doctest.h>

#include "kancql/matrix.hpp"
#include "kancql/rng.hpp"
#include "../support/oracles.hpp"

using namespace kancql;

TEST_CASE("identity times M is M") {
  Rng rng(3);
  const Matrix m = gaussian_sample(rng, 3, 3);
  CHECK(matmul(Matrix::identity(3), m) == m);
}

TEST_CASE("hand-checkable 2x2 product") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5}, {6}});
  CHECK(matmul(a, b) == Matrix::from_rows({{17}, {39}}));
}

TEST_CASE("matmul variants agree with a triple loop") {
  Rng rng(11);
  const Matrix a = gaussian_sample(rng, 7, 5);
  const Matrix b = gaussian_sample(rng, 5, 3);
  const Matrix want = oracle::matmul(a, b);
  CHECK(oracle::max_relative_error(matmul(a, b), want, 1.0) < 1e-12);
  CHECK(oracle::max_relative_error(matmul_nt(a, transpose(b)), want, 1.0) < 1e-12);
  CHECK(oracle::max_relative_error(matmul_tn(transpose(a), b), want, 1.0) < 1e-12);

  Matrix acc(7, 3, 1.0);
  matmul_tn_acc(transpose(a), b, acc);
  Matrix shifted = want;
  for (auto& v : shifted.values()) v += 1.0;
  CHECK(oracle::max_relative_error(acc, shifted, 1.0) < 1e-12);
}

TEST_CASE("large products match the oracle") {
  Rng rng(5);
  const Matrix a = gaussian_sample(rng, 67, 130);
  const Matrix b = gaussian_sample(rng, 130, 41);
  CHECK(oracle::max_relative_error(matmul(a, b), oracle::matmul(a, b), 1.0) < 1e-11);
}

TEST_CASE("shape mismatch names both shapes") {
  const Matrix a(2, 3);
  const Matrix b(4, 2);
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x2") != std::string::npos);
  }
  CHECK_THROWS_AS(hadamard(a, b), ShapeError);
  CHECK_THROWS_AS(hstack(a, b), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST_CASE("stacking, slicing and repetition") {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{5}, {6}});
  CHECK(hstack(a, b) == Matrix::from_rows({{1, 2, 5}, {3, 4, 6}}));
  const std::vector<Matrix> parts{a, Matrix::from_rows({{7, 8}})};
  CHECK(vstack(parts) == Matrix::from_rows({{1, 2}, {3, 4}, {7, 8}}));
  CHECK(col_slice(hstack(a, b), 1, 2) == Matrix::from_rows({{2, 5}, {4, 6}}));
  CHECK(row_slice(a, 1, 1) == Matrix::from_rows({{3, 4}}));
  CHECK(repeat_rows(a, 2) == Matrix::from_rows({{1, 2}, {1, 2}, {3, 4}, {3, 4}}));
  CHECK(column_sums(a) == Matrix::from_rows({{4}, {6}}));
  CHECK(row_sums(a) == Matrix::from_rows({{3}, {7}}));
  Matrix c = a;
  add_row_broadcast(c, Matrix::from_rows({{10, 20}}));
  CHECK(c == Matrix::from_rows({{11, 22}, {13, 24}}));
}
