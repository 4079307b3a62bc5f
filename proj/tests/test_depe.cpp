// Copyright 2026 The dictpfl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dictpfl/depe.hpp"

#include <doctest.h>

#include "dictpfl/rng.hpp"

using namespace dictpfl;
using depe::WeightDecomposition;
using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

namespace {

Matrix random_matrix(Index n, Index m, Rng& rng) {
  Matrix a(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) a(i, j) = rng.normal();
  }
  return a;
}

}  // namespace

TEST_SUITE_BEGIN("depe");

TEST_CASE("init starts at the base weight exactly") {
  Rng rng(11);
  const Matrix w0 = random_matrix(12, 9, rng);
  const WeightDecomposition d = WeightDecomposition::init(w0, 3);
  CHECK(d.table().isZero(0.0));
  // Zero table means reconstruct() returns w0 bit for bit.
  CHECK((d.reconstruct().array() == w0.array()).all());
}

TEST_CASE("dictionary absorbs the scaled singular directions") {
  Rng rng(12);
  const Matrix w0 = random_matrix(10, 10, rng);
  const WeightDecomposition d = WeightDecomposition::init(w0, 4);
  const linalg::TruncatedSvd svd = linalg::truncated_svd(w0, 4);
  CHECK((d.dictionary() - svd.u * svd.sigma.asDiagonal()).cwiseAbs().maxCoeff() <
        1e-12);
  // Column norms of the dictionary are the singular values.
  for (Index k = 0; k < 4; ++k) {
    CHECK(d.dictionary().col(k).norm() ==
          doctest::Approx(svd.sigma[k]).epsilon(1e-10));
  }
}

TEST_CASE("table updates move the effective weight along the dictionary") {
  Rng rng(13);
  const Matrix w0 = random_matrix(8, 6, rng);
  WeightDecomposition d = WeightDecomposition::init(w0, 2);
  const Matrix delta = random_matrix(2, 6, rng);
  const Matrix before_dict = d.dictionary();
  const Matrix before_base = d.base();
  d.apply_table_update(delta, 0.1);
  CHECK((d.table() + 0.1 * delta).cwiseAbs().maxCoeff() < 1e-14);
  const Matrix expected = w0 - 0.1 * d.dictionary() * delta;
  CHECK((d.reconstruct() - expected).cwiseAbs().maxCoeff() < 1e-12);
  // Frozen parts stay frozen.
  CHECK((d.dictionary().array() == before_dict.array()).all());
  CHECK((d.base().array() == before_base.array()).all());
}

TEST_CASE("table_gradient matches finite differences") {
  Rng rng(14);
  const Matrix w0 = random_matrix(7, 5, rng);
  WeightDecomposition d = WeightDecomposition::init(w0, 3);
  Matrix t = random_matrix(3, 5, rng);
  d.apply_table_update(-t, 1.0);  // move table to t

  // Scalar loss L = sum(c .* W_eff) has dW = c, so dT should equal D^T c.
  const Matrix c = random_matrix(7, 5, rng);
  const Matrix analytic = d.table_gradient(c);

  const double eps = 1e-6;
  auto loss = [&](const Matrix& table) {
    return (c.array() * (w0 + d.dictionary() * table).array()).sum();
  };
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 5; ++j) {
      Matrix tp = d.table();
      tp(i, j) += eps;
      Matrix tm = d.table();
      tm(i, j) -= eps;
      const double numeric = (loss(tp) - loss(tm)) / (2.0 * eps);
      CHECK(analytic(i, j) == doctest::Approx(numeric).epsilon(1e-5));
    }
  }
}

TEST_CASE("shape validation") {
  Rng rng(15);
  const Matrix w0 = random_matrix(6, 4, rng);
  WeightDecomposition d = WeightDecomposition::init(w0, 2);
  CHECK_THROWS_AS(d.table_gradient(Matrix::Zero(4, 6)), ShapeError);
  CHECK_THROWS_AS(d.apply_table_update(Matrix::Zero(3, 4), 0.1), ShapeError);
  CHECK_THROWS_AS(WeightDecomposition::init(w0, 5), ParameterError);
  CHECK_THROWS_AS(WeightDecomposition::init(w0, 0), ParameterError);
  CHECK_THROWS_AS(
      WeightDecomposition(w0, Matrix::Zero(5, 2), Matrix::Zero(2, 4)),
      ShapeError);
  CHECK_THROWS_AS(
      WeightDecomposition(w0, Matrix::Zero(6, 2), Matrix::Zero(2, 5)),
      ShapeError);
}

TEST_CASE("full-rank decomposition can represent any update") {
  Rng rng(16);
  const Matrix w0 = random_matrix(5, 5, rng);
  WeightDecomposition d = WeightDecomposition::init(w0, 5);
  const Matrix target = random_matrix(5, 5, rng);
  // Solve D * T = target - w0; D is invertible at full rank here.
  const Matrix t = d.dictionary().fullPivLu().solve(target - w0);
  d.apply_table_update(-t, 1.0);
  CHECK((d.reconstruct() - target).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_SUITE_END();
