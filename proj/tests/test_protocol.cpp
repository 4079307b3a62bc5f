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

#include "dictpfl/protocol.hpp"

#include <cmath>
#include <vector>

#include <doctest.h>

#include "dictpfl/rng.hpp"

using namespace dictpfl;
using protocol::Broadcast;
using protocol::Federation;
using protocol::RoundMetrics;
using protocol::SessionConfig;
using protocol::Upload;
using trainer::Dataset;

namespace {

Dataset small_dataset(std::uint64_t seed = 5) {
  trainer::SynthSpec spec;
  spec.classes = 3;
  spec.dim = 8;
  spec.samples_per_class = 30;
  return trainer::synth_blobs(spec, seed);
}

SessionConfig small_config() {
  SessionConfig cfg;
  cfg.clients = 3;
  cfg.hidden = {8};
  cfg.rank = 4;
  cfg.lr = 0.2;
  cfg.seed = 7;
  return cfg;
}

Upload mock_upload(const he::HeBackend& backend, const he::KeyPair& keys,
                   std::uint32_t client, std::uint32_t round,
                   const std::vector<double>& values,
                   std::vector<double> plain = {}) {
  Rng rng = Rng::stream(client, streams::kEncrypt, round);
  Upload u;
  u.client_id = client;
  u.round = round;
  u.ciphertexts = he::pack_encrypt(backend, keys, values, rng);
  u.plaintext_values = std::move(plain);
  return u;
}

void check_same_metrics(const RoundMetrics& a, const RoundMetrics& b) {
  CHECK(a.round == b.round);
  CHECK(a.local_train_s == b.local_train_s);
  CHECK(a.encrypt_s == b.encrypt_s);
  CHECK(a.upload_s == b.upload_s);
  CHECK(a.aggregate_s == b.aggregate_s);
  CHECK(a.download_s == b.download_s);
  CHECK(a.decrypt_s == b.decrypt_s);
  CHECK(a.update_s == b.update_s);
  CHECK(a.ciphertext_up_bytes == b.ciphertext_up_bytes);
  CHECK(a.ciphertext_down_bytes == b.ciphertext_down_bytes);
  CHECK(a.plaintext_up_bytes == b.plaintext_up_bytes);
  CHECK(a.plaintext_down_bytes == b.plaintext_down_bytes);
  CHECK(a.ciphertext_count == b.ciphertext_count);
  CHECK(a.loss == b.loss);
  CHECK(a.accuracy == b.accuracy);
}

}  // namespace

TEST_SUITE_BEGIN("protocol");

TEST_CASE("mode names parse") {
  CHECK(protocol::parse_packing("compact") == protocol::PackingMode::kCompact);
  CHECK(protocol::parse_packing("dense") == protocol::PackingMode::kDense);
  CHECK_THROWS_AS(protocol::parse_packing("sparse"), ParameterError);
  CHECK(protocol::parse_timing("sim") == protocol::TimingMode::kSimulated);
  CHECK(protocol::parse_timing("wall") == protocol::TimingMode::kMeasured);
  CHECK_THROWS_AS(protocol::parse_timing("cpu"), ParameterError);
}

TEST_CASE("session config validation") {
  SessionConfig cfg = small_config();
  CHECK_NOTHROW(cfg.validate());
  cfg.clients = 0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = small_config();
  cfg.lr = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = small_config();
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = small_config();
  cfg.hidden = {8, 0};
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
  cfg = small_config();
  cfg.prune.beta = 2.0;
  CHECK_THROWS_AS(cfg.validate(), ParameterError);
}

TEST_CASE("messages roundtrip through the wire format") {
  auto backend = he::make_backend(he::Backend::kMock, he::HeParams::toy());
  const he::KeyPair keys = backend->keygen(1);
  const std::vector<double> vals = {1.0, -2.5, 3.25, 0.0};
  const Upload u = mock_upload(*backend, keys, 4, 9, vals, {7.5, -1.25});

  const auto bytes = protocol::serialize(u);
  const Upload back = protocol::parse_upload(bytes);
  CHECK(back.client_id == 4);
  CHECK(back.round == 9);
  REQUIRE(back.ciphertexts.size() == 1);
  CHECK(back.ciphertexts[0].mock_values == vals);
  CHECK(back.plaintext_values == std::vector<double>{7.5, -1.25});

  Broadcast bc;
  bc.round = 9;
  bc.ciphertexts = u.ciphertexts;
  bc.plaintext_values = {0.5};
  const auto bc_bytes = protocol::serialize(bc);
  const Broadcast bcb = protocol::parse_broadcast(bc_bytes);
  CHECK(bcb.round == 9);
  CHECK(bcb.plaintext_values == std::vector<double>{0.5});
  CHECK(bcb.ciphertexts[0].mock_values == vals);

  // Tags are not interchangeable.
  CHECK_THROWS_AS(protocol::parse_upload(bc_bytes), EncodingError);
  CHECK_THROWS_AS(protocol::parse_broadcast(bytes), EncodingError);

  // Every flipped byte is caught by the frame checksum.
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    auto bad = bytes;
    bad[i] ^= 0x20;
    CHECK_THROWS_AS(protocol::parse_upload(bad), EncodingError);
  }
}

TEST_CASE("aggregation averages and guards its inputs") {
  auto backend = he::make_backend(he::Backend::kMock, he::HeParams::toy());
  const he::KeyPair keys = backend->keygen(2);
  const std::vector<double> a = {1.0, 2.0, 3.0};
  const std::vector<double> b = {0.5, -1.0, 2.0};
  const std::vector<double> c = {-0.25, 4.0, 1.0};

  SUBCASE("single upload passes through") {
    const std::vector<Upload> ups = {mock_upload(*backend, keys, 0, 1, a)};
    const Broadcast bc = protocol::aggregate(*backend, ups);
    CHECK(bc.round == 1);
    const auto out = backend->decrypt_chunk(keys, bc.ciphertexts[0]);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(out[i] == a[i] * 1.0);
  }

  SUBCASE("three uploads give the exact running mean") {
    const std::vector<Upload> ups = {mock_upload(*backend, keys, 0, 1, a),
                                     mock_upload(*backend, keys, 1, 1, b),
                                     mock_upload(*backend, keys, 2, 1, c)};
    const Broadcast bc = protocol::aggregate(*backend, ups);
    const auto out = backend->decrypt_chunk(keys, bc.ciphertexts[0]);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(out[i] == (a[i] + b[i] + c[i]) * (1.0 / 3.0));
    }
  }

  SUBCASE("plaintext sidecars average too") {
    const std::vector<Upload> ups = {
        mock_upload(*backend, keys, 0, 1, a, {4.0}),
        mock_upload(*backend, keys, 1, 1, b, {2.0})};
    const Broadcast bc = protocol::aggregate(*backend, ups);
    REQUIRE(bc.plaintext_values.size() == 1);
    CHECK(bc.plaintext_values[0] == (4.0 + 2.0) * 0.5);
  }

  SUBCASE("empty round is refused") {
    CHECK_THROWS_AS(protocol::aggregate(*backend, {}), ProtocolError);
  }

  SUBCASE("duplicate client ids are refused") {
    const std::vector<Upload> ups = {mock_upload(*backend, keys, 0, 1, a),
                                     mock_upload(*backend, keys, 0, 1, b)};
    CHECK_THROWS_AS(protocol::aggregate(*backend, ups), ProtocolError);
  }

  SUBCASE("mixed rounds are refused") {
    const std::vector<Upload> ups = {mock_upload(*backend, keys, 0, 1, a),
                                     mock_upload(*backend, keys, 1, 2, b)};
    CHECK_THROWS_AS(protocol::aggregate(*backend, ups), ProtocolError);
  }

  SUBCASE("chunk count mismatch is refused") {
    const std::vector<double> long_vec(600, 1.0);
    const std::vector<Upload> ups = {mock_upload(*backend, keys, 0, 1, a),
                                     mock_upload(*backend, keys, 1, 1, long_vec)};
    CHECK_THROWS_AS(protocol::aggregate(*backend, ups), ProtocolError);
  }

  SUBCASE("slot geometry mismatch is refused") {
    const std::vector<double> six_hundred(600, 1.0);
    const std::vector<double> seven_hundred(700, 1.0);
    const std::vector<Upload> ups = {
        mock_upload(*backend, keys, 0, 1, six_hundred),
        mock_upload(*backend, keys, 1, 1, seven_hundred)};
    CHECK_THROWS_AS(protocol::aggregate(*backend, ups), ProtocolError);
  }

  SUBCASE("plaintext length mismatch is refused") {
    const std::vector<Upload> ups = {
        mock_upload(*backend, keys, 0, 1, a, {1.0}),
        mock_upload(*backend, keys, 1, 1, b, {1.0, 2.0})};
    CHECK_THROWS_AS(protocol::aggregate(*backend, ups), ProtocolError);
  }
}

TEST_CASE("setup derives the transmitted layout per strategy") {
  const Dataset ds = small_dataset();

  SessionConfig cfg = small_config();
  cfg.strategy = Strategy::kDictPfl;
  Federation fed = protocol::setup(cfg, ds);
  // Layers are 8x8 (rank 4) and 3x8 (rank clamped to 3).
  CHECK(fed.table_len == 4 * 8 + 3 * 8);
  CHECK(fed.bias_len == 8 + 3);
  CHECK(fed.weight_len == 0);
  CHECK(fed.clients.size() == 3);
  for (const auto& client : fed.clients) {
    CHECK(client.model.factorized());
    CHECK(client.shard.size() > 0);
  }

  cfg = small_config();
  cfg.strategy = Strategy::kFedHeFull;
  fed = protocol::setup(cfg, ds);
  CHECK(fed.weight_len == 8 * 8 + 3 * 8);
  CHECK(fed.bias_len == 11);
  CHECK(fed.table_len == 0);
  CHECK_FALSE(fed.clients.front().model.factorized());

  cfg = small_config();
  cfg.strategy = Strategy::kFedHeTopK;
  cfg.topk_layers = 1;
  fed = protocol::setup(cfg, ds);
  CHECK(fed.weight_len == 3 * 8);
  CHECK(fed.bias_len == 3);

  cfg.topk_layers = 5;
  CHECK_THROWS_AS(protocol::setup(cfg, ds), ParameterError);

  cfg = small_config();
  cfg.strategy = Strategy::kSae;
  cfg.sae_fraction = 0.1;
  fed = protocol::setup(cfg, ds);
  const std::size_t total = 8 * 8 + 3 * 8 + 11;
  REQUIRE(fed.sae_mask.size() == total);
  std::size_t sensitive = 0;
  for (auto f : fed.sae_mask) sensitive += f;
  // 10 percent of 99 positions, rounded by the shared percentile rule.
  CHECK(sensitive == total - 89);

  Dataset flat = ds;
  flat.classes = 1;
  CHECK_THROWS_AS(protocol::setup(small_config(), flat), ParameterError);
}

TEST_CASE("pruning state stays in lockstep across clients") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.strategy = Strategy::kDictPfl;
  cfg.prune.s = 0.5;
  cfg.prune.tau = 2;
  Federation fed = protocol::setup(cfg, ds);
  for (int r = 0; r < 6; ++r) {
    const RoundMetrics m = protocol::run_round(fed);
    CHECK(m.round == r + 1);
    CHECK(m.plaintext_up_bytes == 0);  // no model bytes leave in the clear
    CHECK(m.plaintext_down_bytes == 0);
    CHECK(std::isfinite(m.loss));
    const auto& first = fed.clients.front();
    for (const auto& client : fed.clients) {
      CHECK(client.prune.mask == first.prune.mask);
      CHECK(client.prune.reactivated == first.prune.reactivated);
      CHECK(client.selection.indices == first.selection.indices);
    }
    if (r >= cfg.prune.tau) {
      // Window is armed: pruning must actually bite.
      CHECK(first.selection.indices.size() < static_cast<std::size_t>(fed.table_len));
    }
  }
}

TEST_CASE("simulated runs are reproducible field by field") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.strategy = Strategy::kDictPfl;
  Federation f1 = protocol::setup(cfg, ds);
  Federation f2 = protocol::setup(cfg, ds);
  const auto m1 = protocol::run_rounds(f1, 5);
  const auto m2 = protocol::run_rounds(f2, 5);
  REQUIRE(m1.size() == m2.size());
  for (std::size_t i = 0; i < m1.size(); ++i) check_same_metrics(m1[i], m2[i]);
}

TEST_CASE("thread count does not change results") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.strategy = Strategy::kDictPfl;
  cfg.threads = 1;
  Federation f1 = protocol::setup(cfg, ds);
  cfg.threads = 3;
  Federation f3 = protocol::setup(cfg, ds);
  const auto m1 = protocol::run_rounds(f1, 4);
  const auto m3 = protocol::run_rounds(f3, 4);
  for (std::size_t i = 0; i < m1.size(); ++i) check_same_metrics(m1[i], m3[i]);
}

TEST_CASE("lattice and mock backends train the same model") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.strategy = Strategy::kDictPfl;
  cfg.clients = 2;
  Federation mock_fed = protocol::setup(cfg, ds);
  cfg.backend = he::Backend::kToyRlwe;
  Federation rlwe_fed = protocol::setup(cfg, ds);
  const auto mm = protocol::run_rounds(mock_fed, 3);
  const auto mr = protocol::run_rounds(rlwe_fed, 3);
  for (std::size_t i = 0; i < mm.size(); ++i) {
    CHECK(std::abs(mm[i].loss - mr[i].loss) < 1e-2);
    // Bytes are modeled identically regardless of the compute backend.
    CHECK(mm[i].ciphertext_up_bytes == mr[i].ciphertext_up_bytes);
  }
}

TEST_CASE("transmitting every layer reduces top-k to the full baseline") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.topk_layers = 2;  // model depth
  const auto full = protocol::run_baseline_full(cfg, ds, 4);
  const auto topk = protocol::run_baseline_topk(cfg, ds, 4);
  REQUIRE(full.size() == topk.size());
  for (std::size_t i = 0; i < full.size(); ++i) {
    check_same_metrics(full[i], topk[i]);
  }
}

TEST_CASE("untransmitted layers stay frozen under top-k") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.strategy = Strategy::kFedHeTopK;
  cfg.topk_layers = 1;
  Federation fed = protocol::setup(cfg, ds);
  const linalg::Matrix w0 = fed.clients.front().model.layers[0].weight;
  const linalg::Matrix w1 = fed.clients.front().model.layers[1].weight;
  protocol::run_rounds(fed, 3);
  for (const auto& client : fed.clients) {
    CHECK((client.model.layers[0].weight.array() == w0.array()).all());
    CHECK_FALSE((client.model.layers[1].weight.array() == w1.array()).all());
  }
}

TEST_CASE("dense packing changes bytes but not the trajectory") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.strategy = Strategy::kDictPfl;
  cfg.prune.s = 0.6;
  cfg.prune.tau = 1;
  cfg.packing = protocol::PackingMode::kCompact;
  Federation compact = protocol::setup(cfg, ds);
  cfg.packing = protocol::PackingMode::kDense;
  Federation dense = protocol::setup(cfg, ds);
  const auto mc = protocol::run_rounds(compact, 5);
  const auto md = protocol::run_rounds(dense, 5);
  for (std::size_t i = 0; i < mc.size(); ++i) {
    CHECK(mc[i].loss == md[i].loss);
    CHECK(mc[i].accuracy == md[i].accuracy);
    CHECK(mc[i].ciphertext_up_bytes <= md[i].ciphertext_up_bytes);
  }
}

TEST_CASE("sensitivity split sends both channels and stays coherent") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.sae_fraction = 0.1;
  const auto metrics = protocol::run_baseline_sae(cfg, ds, 4);
  for (const RoundMetrics& m : metrics) {
    CHECK(m.ciphertext_up_bytes > 0);
    CHECK(m.plaintext_up_bytes > 0);
    CHECK(std::isfinite(m.loss));
  }
  // The plain channel carries total - sensitive values, 8 bytes each.
  const std::size_t total = 8 * 8 + 3 * 8 + 11;
  const std::size_t sensitive = total - 89;
  CHECK(metrics[0].plaintext_up_bytes ==
        3ULL * (total - sensitive) * 8);
}

TEST_CASE("byte accounting always prices the production parameter set") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  const auto metrics = protocol::run_baseline_full(cfg, ds, 1);
  // 99 values fit one accounting chunk of 25559040 bytes; three clients up,
  // one broadcast down.
  CHECK(metrics[0].ciphertext_up_bytes == 3ULL * 25559040);
  CHECK(metrics[0].ciphertext_down_bytes == 25559040);
  CHECK(metrics[0].ciphertext_count == 4);
  CHECK(metrics[0].upload_s ==
        netsim::transfer_time(25559040, netsim::NetProfile::lan()));
}

TEST_CASE("measured timing keeps deterministic byte counts") {
  const Dataset ds = small_dataset();
  SessionConfig cfg = small_config();
  cfg.timing = protocol::TimingMode::kMeasured;
  Federation fed = protocol::setup(cfg, ds);
  const RoundMetrics m = protocol::run_round(fed);
  CHECK(m.local_train_s >= 0.0);
  CHECK(m.encrypt_s >= 0.0);
  CHECK(m.ciphertext_up_bytes == 3ULL * 25559040);

  CHECK_THROWS_AS(protocol::run_rounds(fed, -1), ParameterError);
}

TEST_SUITE_END();
