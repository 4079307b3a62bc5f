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

#include <string>
#include <utility>

namespace dictpfl::depe {

WeightDecomposition::WeightDecomposition(Matrix w0, Matrix dict, Matrix table)
    : w0_(std::move(w0)), dict_(std::move(dict)), table_(std::move(table)) {
  if (dict_.rows() != w0_.rows()) {
    throw ShapeError("WeightDecomposition: dict rows " +
                     std::to_string(dict_.rows()) + " != weight rows " +
                     std::to_string(w0_.rows()));
  }
  if (table_.rows() != dict_.cols() || table_.cols() != w0_.cols()) {
    throw ShapeError("WeightDecomposition: table must be " +
                     std::to_string(dict_.cols()) + " x " +
                     std::to_string(w0_.cols()));
  }
}

WeightDecomposition WeightDecomposition::init(
    const Eigen::Ref<const Matrix>& w0, Index rank) {
  const linalg::TruncatedSvd svd = linalg::truncated_svd(w0, rank);
  Matrix dict = svd.u * svd.sigma.asDiagonal();
  Matrix table = Matrix::Zero(rank, w0.cols());
  return WeightDecomposition(w0, std::move(dict), std::move(table));
}

Matrix WeightDecomposition::reconstruct() const {
  return w0_ + dict_ * table_;
}

Matrix WeightDecomposition::table_gradient(
    const Eigen::Ref<const Matrix>& weight_grad) const {
  if (weight_grad.rows() != w0_.rows() || weight_grad.cols() != w0_.cols()) {
    throw ShapeError("table_gradient: expected " + std::to_string(w0_.rows()) +
                     " x " + std::to_string(w0_.cols()) + ", got " +
                     std::to_string(weight_grad.rows()) + " x " +
                     std::to_string(weight_grad.cols()));
  }
  return dict_.transpose() * weight_grad;
}

void WeightDecomposition::apply_table_update(
    const Eigen::Ref<const Matrix>& delta, double lr) {
  if (delta.rows() != table_.rows() || delta.cols() != table_.cols()) {
    throw ShapeError("apply_table_update: expected " +
                     std::to_string(table_.rows()) + " x " +
                     std::to_string(table_.cols()) + ", got " +
                     std::to_string(delta.rows()) + " x " +
                     std::to_string(delta.cols()));
  }
  table_ -= lr * delta;
}

}  // namespace dictpfl::depe
