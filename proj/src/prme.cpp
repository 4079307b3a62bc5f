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

#include "dictpfl/prme.hpp"

#include <algorithm>
#include <string>

#include "dictpfl/rng.hpp"

namespace dictpfl::prme {

namespace {

void require_size(const Eigen::Ref<const Vector>& v, Index size,
                  const char* what) {
  if (v.size() != size) {
    throw ShapeError(std::string(what) + ": expected length " +
                     std::to_string(size) + ", got " +
                     std::to_string(v.size()));
  }
}

}  // namespace

void PruneConfig::validate() const {
  if (s < 0.0 || s > 1.0) {
    throw ParameterError("PruneConfig: s outside [0, 1]");
  }
  if (tau < 1) {
    throw ParameterError("PruneConfig: tau must be >= 1");
  }
  if (beta <= 0.0 || beta >= 1.0) {
    throw ParameterError("PruneConfig: beta outside (0, 1)");
  }
}

PruneState PruneState::init(const PruneConfig& config, Index size,
                            std::uint64_t seed) {
  config.validate();
  if (size < 1) {
    throw ParameterError("PruneState: size must be positive");
  }
  PruneState st;
  st.config = config;
  st.seed = seed;
  st.size = size;
  st.mask.assign(static_cast<std::size_t>(size), 1);
  st.reactivated.assign(static_cast<std::size_t>(size), 0);
  st.p = Vector::Ones(size);
  st.accum = Vector::Zero(size);
  return st;
}

std::vector<std::uint8_t> tip_mask(const std::deque<Vector>& history,
                                   const PruneConfig& config, Index size) {
  config.validate();
  const auto n = static_cast<std::size_t>(size);
  std::vector<std::uint8_t> mask(n, 1);
  if (history.size() < static_cast<std::size_t>(config.tau)) {
    return mask;
  }
  // Prune only parameters below the per-round cut in each of the last tau
  // rounds; start from all-pruned and clear on the first escape.
  std::vector<std::uint8_t> pruned(n, 1);
  const std::size_t first = history.size() - static_cast<std::size_t>(config.tau);
  for (std::size_t k = first; k < history.size(); ++k) {
    require_size(history[k], size, "tip_mask history entry");
    const std::vector<std::uint8_t> below =
        linalg::below_fraction(history[k].cwiseAbs(), config.s);
    for (std::size_t i = 0; i < n; ++i) {
      if (!below[i]) pruned[i] = 0;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    mask[i] = pruned[i] ? 0 : 1;
  }
  return mask;
}

void begin_round(PruneState& state) {
  const std::vector<std::uint8_t> next =
      tip_mask(state.history, state.config, state.size);
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (state.mask[i] && !next[i]) {
      state.p[static_cast<Index>(i)] = state.config.beta;
    }
  }
  state.mask = next;
  std::fill(state.reactivated.begin(), state.reactivated.end(), 0);
}

std::vector<std::uint8_t> draw_reactivations(const PruneState& state,
                                             std::uint64_t round) {
  std::vector<std::uint8_t> drawn(state.mask.size(), 0);
  Rng rng = Rng::stream(state.seed, streams::kReactivation, round);
  for (std::size_t i = 0; i < state.mask.size(); ++i) {
    if (!state.mask[i]) {
      drawn[i] = rng.bernoulli(state.p[static_cast<Index>(i)]) ? 1 : 0;
    }
  }
  return drawn;
}

Selection accumulate_and_select(PruneState& state,
                                const Eigen::Ref<const Vector>& local_grad) {
  require_size(local_grad, state.size, "accumulate_and_select");
  Selection sel;
  for (Index i = 0; i < state.size; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (state.mask[u] || state.reactivated[u]) {
      sel.indices.push_back(static_cast<std::uint32_t>(i));
      sel.values.push_back(state.accum[i] + local_grad[i]);
      state.accum[i] = 0.0;
    } else {
      state.accum[i] += local_grad[i];
    }
  }
  return sel;
}

void hrc_update(PruneState& state,
                const Eigen::Ref<const Vector>& global_grad) {
  require_size(global_grad, state.size, "hrc_update");
  const std::vector<std::uint8_t> below =
      linalg::below_fraction(global_grad.cwiseAbs(), state.config.s);
  for (Index i = 0; i < state.size; ++i) {
    const auto u = static_cast<std::size_t>(i);
    if (!state.reactivated[u]) continue;
    if (below[u]) {
      state.p[i] *= state.config.beta;
    } else {
      state.p[i] = std::min(state.p[i] / state.config.beta, 1.0);
    }
  }
}

void push_history(PruneState& state,
                  const Eigen::Ref<const Vector>& global_grad) {
  require_size(global_grad, state.size, "push_history");
  state.history.push_back(global_grad.cwiseAbs());
  while (state.history.size() > static_cast<std::size_t>(state.config.tau)) {
    state.history.pop_front();
  }
}

}  // namespace dictpfl::prme
