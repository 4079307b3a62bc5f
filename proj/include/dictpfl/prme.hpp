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
#include <deque>
#include <vector>

#include "dictpfl/linalg.hpp"

namespace dictpfl::prme {

using linalg::Index;
using linalg::Vector;

/// Pruning hyperparameters.
struct PruneConfig {
  double s = 0.7;     // fraction pruned per historical round
  int tau = 3;        // history window (rounds) for consistent pruning
  double beta = 0.2;  // reactivation probability decay
  void validate() const;
};

/// Shared pruning state. Everything except `accum` is derived solely from
/// broadcast global gradients and the shared seed, so every client holds an
/// identical copy without any extra coordination; `accum` collects each
/// client's own gradients while a parameter sits pruned.
struct PruneState {
  PruneConfig config;
  std::uint64_t seed = 0;
  Index size = 0;

  std::deque<Vector> history;            // |global grad| per round, newest last
  std::vector<std::uint8_t> mask;        // 1 = transmitted, 0 = pruned
  std::vector<std::uint8_t> reactivated; // drawn this round
  Vector p;                              // per-parameter reactivation probability
  Vector accum;                          // local-only gradient accumulator

  static PruneState init(const PruneConfig& config, Index size,
                         std::uint64_t seed);
};

/// Temporal-intersection mask: a parameter is pruned only when its global
/// gradient magnitude ranked in the bottom s-fraction in every one of the
/// last `tau` rounds. With fewer than `tau` rounds of history everything
/// stays active (warm-up).
std::vector<std::uint8_t> tip_mask(const std::deque<Vector>& history,
                                   const PruneConfig& config, Index size);

/// Recomputes the mask from history and applies pruning transitions: a
/// parameter leaving the active set starts with reactivation probability
/// beta. Clears the previous round's reactivation draw.
void begin_round(PruneState& state);

/// Bernoulli draw over pruned parameters from the shared stream
/// (seed, reactivation domain, round). Identical on every client that
/// holds the same state, which is what keeps ciphertext slots aligned.
std::vector<std::uint8_t> draw_reactivations(const PruneState& state,
                                             std::uint64_t round);

/// Sparse upload: the selected indices in ascending order and one value
/// per index.
struct Selection {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
};

/// Splits a local gradient against the current mask and reactivation draw.
/// Selected parameters (active or reactivated) upload accum + grad and
/// reset their accumulator; pruned parameters fold the gradient into the
/// accumulator instead. No gradient mass is ever dropped.
Selection accumulate_and_select(PruneState& state,
                                const Eigen::Ref<const Vector>& local_grad);

/// Reactivation probability update from the aggregated global gradient:
/// a reactivated parameter that still ranks below the current s-percentile
/// decays p *= beta; one that climbed above it recovers p = min(p / beta, 1).
/// Parameters that stayed pruned keep their probability.
void hrc_update(PruneState& state, const Eigen::Ref<const Vector>& global_grad);

/// Appends |global_grad| to the history window, dropping entries older
/// than tau rounds.
void push_history(PruneState& state, const Eigen::Ref<const Vector>& global_grad);

}  // namespace dictpfl::prme
