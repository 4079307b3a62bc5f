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

#include <iosfwd>
#include <span>
#include <vector>

#include "dictpfl/protocol.hpp"

namespace dictpfl::cli {

/// Writes the per-round metrics table. Fixed column order and fixed
/// numeric formatting: identical metric values always produce identical
/// bytes.
void write_metrics_csv(std::ostream& out,
                       std::span<const protocol::RoundMetrics> rounds);

/// Entry point behind main(). Exit codes: 0 success, 2 configuration or
/// validation failure, 3 runtime failure mid-simulation.
int run_main(int argc, const char* const* argv);

}  // namespace dictpfl::cli
