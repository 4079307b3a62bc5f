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
#include <limits>
#include <memory>
#include <vector>

#include "dictpfl/he.hpp"
#include "dictpfl/netsim.hpp"
#include "dictpfl/prme.hpp"
#include "dictpfl/strategy.hpp"
#include "dictpfl/trainer.hpp"

namespace dictpfl::protocol {

using linalg::Index;
using linalg::Matrix;
using linalg::Vector;

/// kCompact packs only the selected values, so pruning shrinks the wire
/// footprint; kDense keeps every position (zeros where pruned), which
/// preserves slot positions but saves nothing.
enum class PackingMode { kCompact, kDense };
PackingMode parse_packing(std::string_view name);

/// kSimulated drives all compute timings from the deterministic cost
/// model, making whole runs reproducible byte for byte; kMeasured takes
/// wall-clock compute timings while link times stay simulated.
enum class TimingMode { kSimulated, kMeasured };
TimingMode parse_timing(std::string_view name);

struct SessionConfig {
  Strategy strategy = Strategy::kDictPfl;
  int clients = 3;
  Index rank = 4;
  prme::PruneConfig prune;
  double lr = 0.5;
  int local_epochs = 1;
  int topk_layers = 1;
  double sae_fraction = 0.1;
  double alpha = std::numeric_limits<double>::infinity();  // shard concentration
  std::vector<Index> hidden = {64};
  PackingMode packing = PackingMode::kCompact;
  TimingMode timing = TimingMode::kSimulated;
  int threads = 1;  // 0 = one per client, capped at hardware threads
  std::uint64_t seed = 1;
  he::Backend backend = he::Backend::kMock;
  he::HeParams he_params = he::HeParams::toy();
  he::HeParams accounting = he::HeParams::accounting();
  netsim::NetProfile net = netsim::NetProfile::lan();
  netsim::CostModel cost = netsim::CostModel::defaults();

  void validate() const;
};

/// Client-to-server message. Only the sensitivity-split strategy puts
/// anything in plaintext_values; the others keep every model-derived byte
/// inside ciphertexts.
struct Upload {
  std::uint32_t client_id = 0;
  std::uint32_t round = 0;
  std::vector<he::Ciphertext> ciphertexts;
  std::vector<double> plaintext_values;
};

/// Server-to-clients message with the aggregated (still encrypted) update
/// and, for the sensitivity-split strategy, the averaged plaintext part.
struct Broadcast {
  std::uint32_t round = 0;
  std::vector<he::Ciphertext> ciphertexts;
  std::vector<double> plaintext_values;
};

std::vector<std::uint8_t> serialize(const Upload& upload);
Upload parse_upload(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> serialize(const Broadcast& broadcast);
Broadcast parse_broadcast(std::span<const std::uint8_t> bytes);

/// Per-round ledger. Byte counts always use the accounting parameter set
/// (production-scale ciphertext sizes) regardless of the compute backend;
/// seconds come from the cost model or the wall clock per TimingMode.
struct RoundMetrics {
  int round = 0;
  double local_train_s = 0.0;
  double encrypt_s = 0.0;
  double upload_s = 0.0;
  double aggregate_s = 0.0;
  double download_s = 0.0;
  double decrypt_s = 0.0;
  double update_s = 0.0;
  std::uint64_t ciphertext_up_bytes = 0;
  std::uint64_t ciphertext_down_bytes = 0;
  std::uint64_t plaintext_up_bytes = 0;
  std::uint64_t plaintext_down_bytes = 0;
  std::uint64_t ciphertext_count = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct ClientState {
  int id = 0;
  trainer::ToyModel model;
  trainer::DataShard shard;
  prme::PruneState prune;  // meaningful only under kDictPfl
  Rng enc_rng{0};

  // Per-round scratch, overwritten each round.
  prme::Selection selection;
  std::size_t enc_count = 0;
  Upload upload;
};

/// One federation instance: shared backend and keys, the client fleet and
/// the evaluation split. Build with setup(), advance with run_round().
struct Federation {
  SessionConfig config;
  std::unique_ptr<he::HeBackend> backend;
  he::KeyPair keys;
  std::vector<ClientState> clients;
  int round = 0;  // completed rounds
  Matrix eval_features;
  std::vector<std::uint32_t> eval_labels;
  std::vector<std::uint8_t> sae_mask;  // static sensitive-position flags
  Index table_len = 0;                 // flattened table size (kDictPfl)
  Index weight_len = 0;                // flattened transmitted weight size
  Index bias_len = 0;                  // flattened transmitted bias size
};

/// Builds the fleet: shards the dataset, initializes one shared model
/// (factorized under kDictPfl), generates keys, and derives the static
/// sensitivity mask for the sensitivity-split strategy from a calibration
/// batch every client can reproduce.
Federation setup(const SessionConfig& config, const trainer::Dataset& dataset);

/// Sum of uploads scaled by 1/K, plus the plaintext average. Rejects
/// mixed rounds, duplicate clients and any cross-client mismatch in
/// chunk geometry with ProtocolError: a single misaligned client would
/// silently corrupt every slot of the sum, so the round aborts instead.
Broadcast aggregate(const he::HeBackend& backend,
                    const std::vector<Upload>& uploads);

/// One synchronous round: local training, selection, encryption, upload,
/// aggregation, broadcast, decryption, model update, evaluation.
RoundMetrics run_round(Federation& fed);

std::vector<RoundMetrics> run_rounds(Federation& fed, int rounds);

/// Convenience one-shots: setup plus run_rounds under a forced strategy.
std::vector<RoundMetrics> run_baseline_full(SessionConfig config,
                                            const trainer::Dataset& dataset,
                                            int rounds);
std::vector<RoundMetrics> run_baseline_topk(SessionConfig config,
                                            const trainer::Dataset& dataset,
                                            int rounds);
std::vector<RoundMetrics> run_baseline_sae(SessionConfig config,
                                           const trainer::Dataset& dataset,
                                           int rounds);

}  // namespace dictpfl::protocol
