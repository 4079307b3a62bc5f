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

#include <string_view>

#include "dictpfl/errors.hpp"

namespace dictpfl {

/// Federated aggregation strategies.
///
/// kDictPfl: dictionary-decomposed tables with consistent pruning.
/// kFedHeFull: every gradient encrypted and transmitted.
/// kFedHeTopK: only the last k layers encrypted and transmitted.
/// kSae: a fixed sensitive fraction encrypted, the rest sent in plaintext.
enum class Strategy { kDictPfl, kFedHeFull, kFedHeTopK, kSae };

inline Strategy parse_strategy(std::string_view name) {
  if (name == "dictpfl") return Strategy::kDictPfl;
  if (name == "full") return Strategy::kFedHeFull;
  if (name == "topk") return Strategy::kFedHeTopK;
  if (name == "sae") return Strategy::kSae;
  throw ParameterError("unknown strategy '" + std::string(name) + "'");
}

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kDictPfl: return "dictpfl";
    case Strategy::kFedHeFull: return "full";
    case Strategy::kFedHeTopK: return "topk";
    case Strategy::kSae: return "sae";
  }
  return "?";
}

}  // namespace dictpfl
