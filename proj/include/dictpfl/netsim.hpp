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
#include <iosfwd>
#include <string>
#include <vector>

#include "dictpfl/he.hpp"
#include "dictpfl/strategy.hpp"

namespace dictpfl::netsim {

/// Symmetric link model: fixed latency plus bytes over bandwidth.
struct NetProfile {
  std::string name;
  double bandwidth_bps = 0.0;
  double latency_s = 0.0;

  static NetProfile lan();  // 1 Gbps, 0.5 ms
  static NetProfile wan();  // 100 Mbps, 50 ms
  static NetProfile named(std::string_view name);
};

double transfer_time(std::uint64_t bytes, const NetProfile& profile);
double transfer_time(std::uint64_t bytes, double bandwidth_bps, double latency_s);

/// Deterministic per-operation costs for simulated compute timing. Every
/// phase duration in a simulated run is a pure function of operation
/// counts, which keeps repeated runs byte-identical; wall-clock timing is
/// an opt-in alternative at the round engine level.
struct CostModel {
  double encrypt_chunk_s = 8e-3;
  double decrypt_chunk_s = 4e-3;
  double add_chunk_s = 4e-4;
  double scale_chunk_s = 2e-4;
  double train_flop_s = 1e-9;
  double update_param_s = 2e-9;

  static CostModel defaults() { return CostModel{}; }
};

/// One dense weight matrix of a described model.
struct LayerShape {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
};

/// Manifest text format: one "name rows cols" triple per line, blank lines
/// and '#' comments ignored. Throws IoError on malformed lines.
std::vector<LayerShape> parse_manifest(std::istream& in);
std::vector<LayerShape> load_manifest(const std::string& path);

std::uint64_t total_elements(const std::vector<LayerShape>& layers);

struct DryRunRequest {
  Strategy strategy = Strategy::kDictPfl;
  int clients = 10;
  int rank = 4;
  double prune_fraction = 0.7;
  int topk_layers = 2;
  double sae_fraction = 0.1;
  he::HeParams accounting = he::HeParams::accounting();
};

/// Per-round communication footprint of a strategy on a model shape,
/// without instantiating any weights. "Warmup" covers rounds before the
/// pruning window fills (everything the strategy encrypts is sent);
/// "steady" is the post-warmup regime with pruning in effect. For
/// strategies without pruning the two regimes coincide.
struct DryRunReport {
  Strategy strategy = Strategy::kDictPfl;
  int clients = 0;
  std::uint64_t model_elements = 0;       // dense weight parameters
  std::uint64_t enc_elements_warmup = 0;  // encrypted per client per round
  std::uint64_t enc_elements_steady = 0;
  std::uint64_t plain_elements = 0;       // plaintext per client per round
  std::uint64_t chunks_warmup = 0;        // ciphertexts per upload
  std::uint64_t chunks_steady = 0;
  std::uint64_t ciphertext_bytes_each = 0;
  std::uint64_t up_bytes_warmup = 0;      // summed over clients, per round
  std::uint64_t up_bytes_steady = 0;
  std::uint64_t down_bytes_warmup = 0;    // one broadcast per round
  std::uint64_t down_bytes_steady = 0;
  std::uint64_t plain_up_bytes = 0;
  std::uint64_t plain_down_bytes = 0;
  std::vector<std::string> warnings;
};

DryRunReport dry_run(const std::vector<LayerShape>& layers,
                     const DryRunRequest& request);

}  // namespace dictpfl::netsim
