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

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dictpfl/errors.hpp"

namespace dictpfl::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Throws NumericalError if any entry is NaN or infinite.
void require_finite(const Eigen::Ref<const Matrix>& m, std::string_view what);

/// Dense product a * b with explicit shape checking.
/// Throws ShapeError when a.cols() != b.rows().
Matrix matmul(const Eigen::Ref<const Matrix>& a,
              const Eigen::Ref<const Matrix>& b);

/// Rank-r factorization w ~= u * sigma.asDiagonal() * vt.
struct TruncatedSvd {
  Matrix u;      // n x r, orthonormal columns
  Vector sigma;  // r, non-negative, non-increasing
  Matrix vt;     // r x m, orthonormal rows
};

/// Truncated singular value decomposition via one-sided Jacobi rotations
/// applied on the smaller side of w. Deterministic: fixed sweep order,
/// singular values sorted descending with ties broken by original column
/// index, and zero singular values paired with an orthonormal completion
/// of the computed basis.
///
/// Throws ParameterError unless 1 <= rank <= min(n, m); NumericalError if
/// the sweep limit is exhausted before the off-diagonal tolerance (1e-12)
/// is met.
TruncatedSvd truncated_svd(const Eigen::Ref<const Matrix>& w, Index rank);

/// Magnitude threshold theta such that exactly floor(s * len) entries of
/// |values| fall strictly below it under a deterministic tie rule: entries
/// are ordered by (|value|, index) ascending and the first floor(s * len)
/// count as "below". Returns -inf for s = 0 and +inf for s = 1 so that the
/// below-set is empty or everything, respectively.
double percentile_threshold(const Eigen::Ref<const Vector>& values, double s);

/// Flags the below-set described by percentile_threshold: flags[i] = 1 for
/// exactly the floor(s * len) entries ranked lowest by (|value|, index).
/// Every comparison against a magnitude percentile in this library goes
/// through this function so pruning decisions are bitwise reproducible.
std::vector<std::uint8_t> below_fraction(
    const Eigen::Ref<const Vector>& values, double s);

}  // namespace dictpfl::linalg
