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

#include "dictpfl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace dictpfl::linalg {

namespace {

constexpr double kJacobiTol = 1e-12;
constexpr int kMaxSweeps = 100;

// Count of entries ranked "below" an s-quantile cut. Grid values of s that
// make s * len an exact integer are honored even when the nearest double
// product lands a hair off the integer.
std::size_t below_count(double s, std::size_t len) {
  const double t = s * static_cast<double>(len);
  const auto rounded = static_cast<long long>(std::llround(t));
  if (std::abs(t - static_cast<double>(rounded)) <= 1e-9 * (1.0 + std::abs(t))) {
    return static_cast<std::size_t>(rounded);
  }
  return static_cast<std::size_t>(std::floor(t));
}

// Indices of `values` ordered by (|value|, index) ascending.
std::vector<Index> magnitude_order(const Eigen::Ref<const Vector>& values) {
  std::vector<Index> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    const double ma = std::abs(values[a]);
    const double mb = std::abs(values[b]);
    if (ma != mb) return ma < mb;
    return a < b;
  });
  return order;
}

// Extends `basis` (orthonormal columns in basis.leftCols(used)) with one
// more orthonormal column, chosen as the unit vector with the largest
// residual after projecting out the existing columns.
Vector orthonormal_completion_column(const Matrix& basis, Index used) {
  const Index n = basis.rows();
  Index best = -1;
  double best_norm2 = -1.0;
  for (Index cand = 0; cand < n; ++cand) {
    double proj2 = 0.0;
    for (Index k = 0; k < used; ++k) {
      const double d = basis(cand, k);
      proj2 += d * d;
    }
    const double res2 = 1.0 - proj2;
    if (res2 > best_norm2) {
      best_norm2 = res2;
      best = cand;
    }
  }
  Vector col = Vector::Unit(n, best);
  for (int pass = 0; pass < 2; ++pass) {
    for (Index k = 0; k < used; ++k) {
      col -= basis.col(k).dot(col) * basis.col(k);
    }
  }
  const double norm = col.norm();
  if (norm <= 0.0) {
    throw NumericalError("truncated_svd: orthonormal completion failed");
  }
  return col / norm;
}

}  // namespace

void require_finite(const Eigen::Ref<const Matrix>& m, std::string_view what) {
  if (!m.allFinite()) {
    throw NumericalError(std::string(what) + ": non-finite entries");
  }
}

Matrix matmul(const Eigen::Ref<const Matrix>& a,
              const Eigen::Ref<const Matrix>& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions " + std::to_string(a.cols()) +
                     " and " + std::to_string(b.rows()) + " differ");
  }
  return a * b;
}

TruncatedSvd truncated_svd(const Eigen::Ref<const Matrix>& w, Index rank) {
  const Index n = w.rows();
  const Index m = w.cols();
  if (n == 0 || m == 0) {
    throw ParameterError("truncated_svd: empty matrix");
  }
  if (rank < 1 || rank > std::min(n, m)) {
    throw ParameterError("truncated_svd: rank " + std::to_string(rank) +
                         " outside [1, " + std::to_string(std::min(n, m)) +
                         "]");
  }
  require_finite(w, "truncated_svd");

  // Rotate columns of the side with fewer of them; rotations on p columns
  // converge in O(p^2) pair visits per sweep.
  const bool transposed = m > n;
  Matrix a = transposed ? Matrix(w.transpose()) : Matrix(w);
  const Index p = a.cols();
  Matrix v = Matrix::Identity(p, p);

  // Columns this small against the whole matrix carry only roundoff; the
  // angle between two such columns is arbitrary and rotating them would
  // never settle. Rotations keep the Frobenius norm, so one floor suffices.
  const double col_floor = a.norm() * 1e-14;
  const double col_floor_sq = col_floor * col_floor;

  bool converged = false;
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (Index i = 0; i + 1 < p; ++i) {
      for (Index j = i + 1; j < p; ++j) {
        const double alpha = a.col(i).squaredNorm();
        const double beta = a.col(j).squaredNorm();
        const double g = a.col(i).dot(a.col(j));
        if (alpha <= col_floor_sq || beta <= col_floor_sq) continue;
        if (std::abs(g) <= kJacobiTol * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * g);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        const Vector ai = a.col(i);
        const Vector aj = a.col(j);
        a.col(i) = c * ai - s * aj;
        a.col(j) = s * ai + c * aj;
        const Vector vi = v.col(i);
        const Vector vj = v.col(j);
        v.col(i) = c * vi - s * vj;
        v.col(j) = s * vi + c * vj;
      }
    }
  }
  if (!converged) {
    throw NumericalError("truncated_svd: Jacobi sweeps did not converge");
  }

  Vector norms(p);
  for (Index k = 0; k < p; ++k) norms[k] = a.col(k).norm();
  std::vector<Index> order(static_cast<std::size_t>(p));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index x, Index y) {
    if (norms[x] != norms[y]) return norms[x] > norms[y];
    return x < y;
  });

  const double sigma_max = norms[order[0]];
  const double zero_cutoff = sigma_max * 1e-13;

  // Left factor of the working orientation; zero singular directions get an
  // orthonormal completion instead of a normalized noise vector.
  Matrix left(a.rows(), rank);
  Vector sigma(rank);
  Matrix right(p, rank);
  Index used = 0;
  for (Index k = 0; k < rank; ++k) {
    const Index src = order[static_cast<std::size_t>(k)];
    right.col(k) = v.col(src);
    if (norms[src] > zero_cutoff) {
      sigma[k] = norms[src];
      left.col(k) = a.col(src) / norms[src];
    } else {
      sigma[k] = 0.0;
      left.col(k) = orthonormal_completion_column(left, used);
    }
    ++used;
  }

  TruncatedSvd out;
  out.sigma = sigma;
  if (!transposed) {
    out.u = std::move(left);
    out.vt = right.transpose();
  } else {
    out.u = std::move(right);
    out.vt = left.transpose();
  }

  const double u_err =
      (out.u.transpose() * out.u - Matrix::Identity(rank, rank))
          .cwiseAbs()
          .maxCoeff();
  const double v_err =
      (out.vt * out.vt.transpose() - Matrix::Identity(rank, rank))
          .cwiseAbs()
          .maxCoeff();
  if (u_err > 1e-8 || v_err > 1e-8) {
    throw NumericalError("truncated_svd: factors lost orthonormality");
  }
  return out;
}

double percentile_threshold(const Eigen::Ref<const Vector>& values, double s) {
  if (values.size() == 0) {
    throw ParameterError("percentile_threshold: empty input");
  }
  if (s < 0.0 || s > 1.0) {
    throw ParameterError("percentile_threshold: fraction outside [0, 1]");
  }
  const auto len = static_cast<std::size_t>(values.size());
  const std::size_t k = below_count(s, len);
  if (k == 0) return -std::numeric_limits<double>::infinity();
  if (k >= len) return std::numeric_limits<double>::infinity();
  const std::vector<Index> order = magnitude_order(values);
  return std::abs(values[order[k]]);
}

std::vector<std::uint8_t> below_fraction(
    const Eigen::Ref<const Vector>& values, double s) {
  if (values.size() == 0) {
    throw ParameterError("below_fraction: empty input");
  }
  if (s < 0.0 || s > 1.0) {
    throw ParameterError("below_fraction: fraction outside [0, 1]");
  }
  const auto len = static_cast<std::size_t>(values.size());
  const std::size_t k = below_count(s, len);
  std::vector<std::uint8_t> flags(len, 0);
  if (k == 0) return flags;
  const std::vector<Index> order = magnitude_order(values);
  for (std::size_t i = 0; i < k && i < len; ++i) {
    flags[static_cast<std::size_t>(order[i])] = 1;
  }
  return flags;
}

}  // namespace dictpfl::linalg
