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
#include <optional>
#include <string>
#include <vector>

#include "dictpfl/depe.hpp"
#include "dictpfl/linalg.hpp"

namespace dictpfl::trainer {

using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

struct Dataset {
  Matrix features;  // one sample per row
  std::vector<std::uint32_t> labels;
  int classes = 0;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
};

/// Isotropic Gaussian blobs, one per class. Class means sit `margin` noise
/// sigmas from the origin in random directions.
struct SynthSpec {
  int classes = 4;
  int dim = 32;
  int samples_per_class = 200;
  double margin = 6.0;
};

Dataset synth_blobs(const SynthSpec& spec, std::uint64_t seed);

/// Binary container: "DPDS" magic, version, class and feature counts, then
/// row-major doubles and label words, all little-endian.
void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);
/// Plain-text dump (f0..fd-1,label per row) for eyeballing.
void write_dataset_csv(const Dataset& ds, const std::string& path);

struct DataShard {
  Matrix features;
  std::vector<std::uint32_t> labels;
  Index size() const { return features.rows(); }
};

/// Splits a dataset into client shards with Dirichlet(alpha) class
/// proportions; small alpha concentrates classes on few clients. An
/// infinite alpha deals every class evenly. Shard sizes are equalized by
/// trimming to the smallest shard.
std::vector<DataShard> dirichlet_partition(const Dataset& ds, int clients,
                                           double alpha, std::uint64_t seed);

/// Fully connected layer holding either a dense weight or its
/// dictionary decomposition, never both.
struct DenseLayer {
  Matrix weight;  // out x in; empty once factorized
  Vector bias;
  std::optional<depe::WeightDecomposition> factor;

  Index in() const;
  Index out() const;
  Matrix effective_weight() const;
};

/// Small MLP with rectified hidden layers and a linear head. Forward
/// always goes through the effective (reconstructed) weights; after
/// factorize() the only trainable state is each layer's table and bias.
struct ToyModel {
  std::vector<DenseLayer> layers;

  /// dims = {input, hidden..., classes}; weights N(0, 1/sqrt(fan_in)).
  static ToyModel mlp(const std::vector<Index>& dims, std::uint64_t seed);

  /// Replaces every dense weight with its decomposition. The rank is
  /// clamped per layer to min(rows, cols) so narrow heads keep a valid
  /// factorization when the global rank exceeds their smaller dimension.
  void factorize(Index rank);

  Matrix logits(const Eigen::Ref<const Matrix>& x) const;
  std::size_t depth() const { return layers.size(); }
  int classes() const;
  bool factorized() const;
};

double cross_entropy(const Eigen::Ref<const Matrix>& logits,
                     const std::vector<std::uint32_t>& labels);
double accuracy(const Eigen::Ref<const Matrix>& logits,
                const std::vector<std::uint32_t>& labels);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};
EvalResult evaluate(const ToyModel& model, const Eigen::Ref<const Matrix>& x,
                    const std::vector<std::uint32_t>& labels);

/// Per-layer loss gradients w.r.t. effective weights and biases.
struct Gradients {
  std::vector<Matrix> weight;
  std::vector<Vector> bias;
};

/// Full-batch gradient of the mean cross-entropy at the model's current
/// effective weights.
Gradients gradient(const ToyModel& model, const Eigen::Ref<const Matrix>& x,
                   const std::vector<std::uint32_t>& labels);

/// Runs `epochs` full-batch descent steps from the model's effective
/// weights on the shard, then reports the result in difference form,
/// (start - end) / lr, so multi-epoch local work composes with plain
/// federated averaging. lr = 0 short-circuits to zero gradients. Throws
/// NumericalError if the local loss diverges.
Gradients local_train(const ToyModel& model, const DataShard& shard,
                      int epochs, double lr);

/// Forward plus backward cost of one full-batch epoch, used by the
/// simulated compute clock.
std::uint64_t train_flops(const ToyModel& model, Index batch, int epochs);

}  // namespace dictpfl::trainer
