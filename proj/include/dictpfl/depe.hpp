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

#include "dictpfl/linalg.hpp"

namespace dictpfl::depe {

using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

/// Dictionary-decomposed weight: effective weight = w0 + dict * table.
///
/// w0 (n x m) and dict (n x r) are frozen at construction and never change;
/// all adaptation flows through the r x m lookup table. Only table
/// gradients ever leave the owning client, so the dictionary (and with it
/// the base weight) stays local by construction.
class WeightDecomposition {
 public:
  /// Wraps existing factors. Shapes must agree: w0 n x m, dict n x r,
  /// table r x m; throws ShapeError otherwise.
  WeightDecomposition(Matrix w0, Matrix dict, Matrix table);

  /// Decomposes a pretrained weight. The dictionary absorbs the top-rank
  /// left singular vectors scaled by their singular values, and the table
  /// starts at zero so the initial effective weight equals w0 exactly.
  static WeightDecomposition init(const Eigen::Ref<const Matrix>& w0,
                                  Index rank);

  const Matrix& base() const { return w0_; }
  const Matrix& dictionary() const { return dict_; }
  const Matrix& table() const { return table_; }
  Index rows() const { return w0_.rows(); }
  Index cols() const { return w0_.cols(); }
  Index rank() const { return dict_.cols(); }

  /// Effective dense weight w0 + dict * table.
  Matrix reconstruct() const;

  /// Pulls a loss gradient w.r.t. the effective weight back to table
  /// space: dL/dT = dict^T * dL/dW. Throws ShapeError if weight_grad is
  /// not n x m.
  Matrix table_gradient(const Eigen::Ref<const Matrix>& weight_grad) const;

  /// Gradient step table -= lr * delta. The base and dictionary are
  /// untouched. Throws ShapeError if delta is not r x m.
  void apply_table_update(const Eigen::Ref<const Matrix>& delta, double lr);

 private:
  Matrix w0_;
  Matrix dict_;
  Matrix table_;
};

}  // namespace dictpfl::depe
