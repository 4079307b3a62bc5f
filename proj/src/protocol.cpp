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

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <mutex>
#include <set>
#include <thread>
#include <utility>

#include "dictpfl/detail/wire.hpp"

namespace dictpfl::protocol {

namespace {

using detail::Reader;
using detail::Writer;

constexpr std::uint8_t kMessageVersion = 1;

int resolve_threads(int requested, int clients) {
  if (requested > 0) return std::min(requested, clients);
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  return std::min(clients, static_cast<int>(hw));
}

// Runs fn(0..n-1), possibly on several threads; the first exception wins
// and is rethrown on the calling thread.
void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const int i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int count = std::min(threads, n);
  pool.reserve(static_cast<std::size_t>(count));
  for (int t = 0; t < count; ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
      .count();
}

std::size_t first_transmitted_layer(const SessionConfig& cfg,
                                    std::size_t depth) {
  if (cfg.strategy == Strategy::kFedHeTopK) {
    return depth - static_cast<std::size_t>(cfg.topk_layers);
  }
  return 0;
}

// Transmitted layout for dense-weight strategies: weights of layers
// [first, depth) flattened column-major in layer order, then their biases.
std::vector<double> flatten_gradients(const trainer::Gradients& g,
                                      std::size_t first) {
  std::vector<double> flat;
  std::size_t total = 0;
  for (std::size_t l = first; l < g.weight.size(); ++l) {
    total += static_cast<std::size_t>(g.weight[l].size()) +
             static_cast<std::size_t>(g.bias[l].size());
  }
  flat.reserve(total);
  for (std::size_t l = first; l < g.weight.size(); ++l) {
    flat.insert(flat.end(), g.weight[l].data(),
                g.weight[l].data() + g.weight[l].size());
  }
  for (std::size_t l = first; l < g.weight.size(); ++l) {
    flat.insert(flat.end(), g.bias[l].data(),
                g.bias[l].data() + g.bias[l].size());
  }
  return flat;
}

void apply_flat_update(trainer::ToyModel& model,
                       const std::vector<double>& flat, std::size_t first,
                       double lr) {
  std::size_t off = 0;
  for (std::size_t l = first; l < model.layers.size(); ++l) {
    trainer::DenseLayer& layer = model.layers[l];
    const auto count = static_cast<std::size_t>(layer.weight.size());
    Eigen::Map<const Matrix> delta(flat.data() + off, layer.weight.rows(),
                                   layer.weight.cols());
    layer.weight -= lr * delta;
    off += count;
  }
  for (std::size_t l = first; l < model.layers.size(); ++l) {
    trainer::DenseLayer& layer = model.layers[l];
    const auto count = static_cast<std::size_t>(layer.bias.size());
    Eigen::Map<const Vector> delta(flat.data() + off, layer.bias.size());
    layer.bias -= lr * delta;
    off += count;
  }
  if (off != flat.size()) {
    throw ShapeError("apply_flat_update: layout size mismatch");
  }
}

// Table gradients of every layer, flattened column-major in layer order.
Vector flatten_table_gradients(const trainer::ToyModel& model,
                               const trainer::Gradients& g, Index table_len) {
  Vector flat(table_len);
  Index off = 0;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const auto& factor = model.layers[l].factor;
    const Matrix tg = factor->table_gradient(g.weight[l]);
    std::copy(tg.data(), tg.data() + tg.size(), flat.data() + off);
    off += tg.size();
  }
  if (off != table_len) {
    throw ShapeError("flatten_table_gradients: layout size mismatch");
  }
  return flat;
}

void apply_table_and_bias(trainer::ToyModel& model, const Vector& table_grad,
                          const std::vector<double>& bias_grad, double lr) {
  Index off = 0;
  for (auto& layer : model.layers) {
    auto& factor = layer.factor;
    const Index rows = factor->rank();
    const Index cols = factor->cols();
    Eigen::Map<const Matrix> delta(table_grad.data() + off, rows, cols);
    factor->apply_table_update(delta, lr);
    off += rows * cols;
  }
  std::size_t boff = 0;
  for (auto& layer : model.layers) {
    const auto count = static_cast<std::size_t>(layer.bias.size());
    Eigen::Map<const Vector> delta(bias_grad.data() + boff,
                                   layer.bias.size());
    layer.bias -= lr * delta;
    boff += count;
  }
}

void serialize_message_body(Writer& w, std::uint32_t round,
                            const std::vector<he::Ciphertext>& cts,
                            const std::vector<double>& plain) {
  w.u32(round);
  w.u32(static_cast<std::uint32_t>(cts.size()));
  for (const he::Ciphertext& ct : cts) {
    const std::vector<std::uint8_t> frame = he::serialize(ct);
    w.raw(frame);
  }
  w.u32(static_cast<std::uint32_t>(plain.size()));
  for (double v : plain) w.f64(v);
}

void parse_message_body(Reader& r, std::uint32_t& round,
                        std::vector<he::Ciphertext>& cts,
                        std::vector<double>& plain) {
  round = r.u32();
  const std::uint32_t ct_count = r.u32();
  cts.clear();
  cts.reserve(ct_count);
  for (std::uint32_t i = 0; i < ct_count; ++i) {
    if (r.remaining() < 4) {
      throw EncodingError("message parse: truncated ciphertext frame");
    }
    // Each ciphertext frame self-describes its length: u32 body length
    // plus 4 header and 8 checksum bytes.
    const auto head = r.raw(4);
    std::uint32_t body_len = 0;
    for (int b = 0; b < 4; ++b) {
      body_len |= static_cast<std::uint32_t>(head[static_cast<std::size_t>(b)])
                  << (8 * b);
    }
    const std::size_t rest = static_cast<std::size_t>(body_len) + 8;
    const auto tail = r.raw(rest);
    std::vector<std::uint8_t> whole;
    whole.reserve(4 + rest);
    whole.insert(whole.end(), head.begin(), head.end());
    whole.insert(whole.end(), tail.begin(), tail.end());
    cts.push_back(he::parse_ciphertext(whole));
  }
  const std::uint32_t plain_count = r.u32();
  plain.clear();
  plain.reserve(plain_count);
  for (std::uint32_t i = 0; i < plain_count; ++i) plain.push_back(r.f64());
}

}  // namespace

PackingMode parse_packing(std::string_view name) {
  if (name == "compact") return PackingMode::kCompact;
  if (name == "dense") return PackingMode::kDense;
  throw ParameterError("unknown packing mode '" + std::string(name) + "'");
}

TimingMode parse_timing(std::string_view name) {
  if (name == "sim") return TimingMode::kSimulated;
  if (name == "wall") return TimingMode::kMeasured;
  throw ParameterError("unknown timing mode '" + std::string(name) + "'");
}

void SessionConfig::validate() const {
  if (clients < 1) throw ParameterError("config: clients must be >= 1");
  if (rank < 1) throw ParameterError("config: rank must be >= 1");
  prune.validate();
  if (!std::isfinite(lr) || lr < 0.0) {
    throw ParameterError("config: learning rate must be finite and >= 0");
  }
  if (local_epochs < 1) throw ParameterError("config: epochs must be >= 1");
  if (topk_layers < 0) throw ParameterError("config: topk layers must be >= 0");
  if (sae_fraction < 0.0 || sae_fraction > 1.0) {
    throw ParameterError("config: sensitive fraction outside [0, 1]");
  }
  if (!(alpha > 0.0)) throw ParameterError("config: alpha must be positive");
  for (Index h : hidden) {
    if (h < 1) throw ParameterError("config: non-positive hidden size");
  }
  if (threads < 0) throw ParameterError("config: threads must be >= 0");
  he_params.validate();
  accounting.validate();
  if (!(net.bandwidth_bps > 0.0) || net.latency_s < 0.0) {
    throw ParameterError("config: invalid network profile");
  }
}

std::vector<std::uint8_t> serialize(const Upload& upload) {
  Writer w;
  w.tag("UPLD");
  w.u8(kMessageVersion);
  w.u32(upload.client_id);
  serialize_message_body(w, upload.round, upload.ciphertexts,
                         upload.plaintext_values);
  return detail::frame(w.take());
}

Upload parse_upload(std::span<const std::uint8_t> bytes) {
  Reader r(detail::unframe(bytes));
  if (r.tag() != "UPLD") throw EncodingError("upload parse: bad tag");
  if (r.u8() != kMessageVersion) {
    throw EncodingError("upload parse: unsupported version");
  }
  Upload u;
  u.client_id = r.u32();
  parse_message_body(r, u.round, u.ciphertexts, u.plaintext_values);
  if (!r.done()) throw EncodingError("upload parse: trailing bytes");
  return u;
}

std::vector<std::uint8_t> serialize(const Broadcast& broadcast) {
  Writer w;
  w.tag("BCST");
  w.u8(kMessageVersion);
  serialize_message_body(w, broadcast.round, broadcast.ciphertexts,
                         broadcast.plaintext_values);
  return detail::frame(w.take());
}

Broadcast parse_broadcast(std::span<const std::uint8_t> bytes) {
  Reader r(detail::unframe(bytes));
  if (r.tag() != "BCST") throw EncodingError("broadcast parse: bad tag");
  if (r.u8() != kMessageVersion) {
    throw EncodingError("broadcast parse: unsupported version");
  }
  Broadcast b;
  parse_message_body(r, b.round, b.ciphertexts, b.plaintext_values);
  if (!r.done()) throw EncodingError("broadcast parse: trailing bytes");
  return b;
}

Federation setup(const SessionConfig& config, const trainer::Dataset& dataset) {
  config.validate();
  if (dataset.classes < 2) {
    throw ParameterError("setup: dataset needs at least two classes");
  }

  Federation fed;
  fed.config = config;

  std::vector<Index> dims;
  dims.push_back(dataset.dim());
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(dataset.classes);
  trainer::ToyModel model = trainer::ToyModel::mlp(dims, config.seed);

  const std::size_t depth = model.depth();
  if (config.strategy == Strategy::kFedHeTopK &&
      static_cast<std::size_t>(config.topk_layers) > depth) {
    throw ParameterError("setup: topk layers exceeds model depth");
  }
  if (config.strategy == Strategy::kDictPfl) {
    model.factorize(config.rank);
  }

  const std::size_t first = first_transmitted_layer(config, depth);
  for (std::size_t l = 0; l < depth; ++l) {
    if (config.strategy == Strategy::kDictPfl) {
      const auto& f = model.layers[l].factor;
      fed.table_len += f->rank() * f->cols();
    } else if (l >= first) {
      fed.weight_len += model.layers[l].weight.size();
    }
    if (config.strategy == Strategy::kDictPfl || l >= first) {
      fed.bias_len += model.layers[l].bias.size();
    }
  }

  fed.backend = he::make_backend(config.backend, config.he_params);
  fed.keys = fed.backend->keygen(config.seed);

  if (config.strategy == Strategy::kSae) {
    // Sensitivity calibration: gradient of the shared initial model on a
    // batch drawn from the shared seed, so every client derives the same
    // split without exchanging data.
    Rng calib_rng = Rng::stream(config.seed, streams::kCalibration);
    const Index batch = 64;
    Matrix calib(batch, dataset.dim());
    std::vector<std::uint32_t> calib_labels(static_cast<std::size_t>(batch));
    for (Index r = 0; r < batch; ++r) {
      for (Index c = 0; c < dataset.dim(); ++c) calib(r, c) = calib_rng.normal();
    }
    for (auto& y : calib_labels) {
      y = static_cast<std::uint32_t>(
          calib_rng.below(static_cast<std::uint64_t>(dataset.classes)));
    }
    const trainer::Gradients g = trainer::gradient(model, calib, calib_labels);
    const std::vector<double> flat = flatten_gradients(g, 0);
    Eigen::Map<const Vector> mags(flat.data(),
                                  static_cast<Index>(flat.size()));
    const std::vector<std::uint8_t> below =
        linalg::below_fraction(mags.cwiseAbs(), 1.0 - config.sae_fraction);
    fed.sae_mask.resize(flat.size());
    for (std::size_t i = 0; i < flat.size(); ++i) {
      fed.sae_mask[i] = below[i] ? 0 : 1;
    }
  }

  const std::vector<trainer::DataShard> shards = trainer::dirichlet_partition(
      dataset, config.clients, config.alpha, config.seed);

  fed.clients.resize(static_cast<std::size_t>(config.clients));
  for (int c = 0; c < config.clients; ++c) {
    ClientState& st = fed.clients[static_cast<std::size_t>(c)];
    st.id = c;
    st.model = model;
    st.shard = shards[static_cast<std::size_t>(c)];
    st.enc_rng = Rng::stream(config.seed, streams::kEncrypt,
                             static_cast<std::uint64_t>(c));
    if (config.strategy == Strategy::kDictPfl) {
      st.prune = prme::PruneState::init(config.prune, fed.table_len, config.seed);
    }
  }

  fed.eval_features = dataset.features;
  fed.eval_labels = dataset.labels;
  return fed;
}

Broadcast aggregate(const he::HeBackend& backend,
                    const std::vector<Upload>& uploads) {
  if (uploads.empty()) {
    throw ProtocolError("aggregate: no uploads");
  }
  const std::uint32_t round = uploads.front().round;
  const std::size_t chunks = uploads.front().ciphertexts.size();
  const std::size_t plain_len = uploads.front().plaintext_values.size();
  std::set<std::uint32_t> seen;
  for (const Upload& u : uploads) {
    if (!seen.insert(u.client_id).second) {
      throw ProtocolError("aggregate: duplicate upload from client " +
                          std::to_string(u.client_id));
    }
    if (u.round != round) {
      throw ProtocolError("aggregate: client " + std::to_string(u.client_id) +
                          " sent round " + std::to_string(u.round) +
                          ", expected " + std::to_string(round));
    }
    if (u.ciphertexts.size() != chunks) {
      throw ProtocolError("aggregate: client " + std::to_string(u.client_id) +
                          " sent " + std::to_string(u.ciphertexts.size()) +
                          " chunks, expected " + std::to_string(chunks));
    }
    if (u.plaintext_values.size() != plain_len) {
      throw ProtocolError("aggregate: client " + std::to_string(u.client_id) +
                          " plaintext length mismatch");
    }
  }

  Broadcast bc;
  bc.round = round;
  bc.ciphertexts = uploads.front().ciphertexts;
  try {
    for (std::size_t i = 1; i < uploads.size(); ++i) {
      for (std::size_t j = 0; j < chunks; ++j) {
        bc.ciphertexts[j] =
            backend.add(bc.ciphertexts[j], uploads[i].ciphertexts[j]);
      }
    }
  } catch (const IncompatibilityError& e) {
    throw ProtocolError(std::string("aggregate: misaligned chunks: ") +
                        e.what());
  }
  const double inv_k = 1.0 / static_cast<double>(uploads.size());
  for (std::size_t j = 0; j < chunks; ++j) {
    bc.ciphertexts[j] = backend.scale_plain(bc.ciphertexts[j], inv_k);
  }

  bc.plaintext_values.assign(plain_len, 0.0);
  for (const Upload& u : uploads) {
    for (std::size_t i = 0; i < plain_len; ++i) {
      bc.plaintext_values[i] += u.plaintext_values[i];
    }
  }
  for (double& v : bc.plaintext_values) v *= inv_k;
  return bc;
}

RoundMetrics run_round(Federation& fed) {
  const SessionConfig& cfg = fed.config;
  const int k = cfg.clients;
  const int round = fed.round;
  const int threads = resolve_threads(cfg.threads, k);
  const std::size_t depth = fed.clients.front().model.depth();
  const std::size_t first = first_transmitted_layer(cfg, depth);

  RoundMetrics m;
  m.round = round + 1;

  std::vector<double> train_walls(static_cast<std::size_t>(k), 0.0);
  std::vector<double> encrypt_walls(static_cast<std::size_t>(k), 0.0);

  parallel_for(k, threads, [&](int c) {
    ClientState& st = fed.clients[static_cast<std::size_t>(c)];
    auto t0 = std::chrono::steady_clock::now();

    if (cfg.strategy == Strategy::kDictPfl) {
      prme::begin_round(st.prune);
      st.prune.reactivated =
          prme::draw_reactivations(st.prune, static_cast<std::uint64_t>(round));
    }
    const trainer::Gradients local =
        trainer::local_train(st.model, st.shard, cfg.local_epochs, cfg.lr);

    std::vector<double> enc_values;
    std::vector<double> plain_values;
    switch (cfg.strategy) {
      case Strategy::kDictPfl: {
        const Vector g_table =
            flatten_table_gradients(st.model, local, fed.table_len);
        st.selection = prme::accumulate_and_select(st.prune, g_table);
        if (cfg.packing == PackingMode::kCompact) {
          enc_values = st.selection.values;
        } else {
          enc_values.assign(static_cast<std::size_t>(fed.table_len), 0.0);
          for (std::size_t j = 0; j < st.selection.indices.size(); ++j) {
            enc_values[st.selection.indices[j]] = st.selection.values[j];
          }
        }
        for (const Vector& b : local.bias) {
          enc_values.insert(enc_values.end(), b.data(), b.data() + b.size());
        }
        break;
      }
      case Strategy::kFedHeFull:
      case Strategy::kFedHeTopK: {
        enc_values = flatten_gradients(local, first);
        break;
      }
      case Strategy::kSae: {
        const std::vector<double> flat = flatten_gradients(local, 0);
        enc_values.reserve(flat.size());
        for (std::size_t i = 0; i < flat.size(); ++i) {
          if (fed.sae_mask[i]) {
            enc_values.push_back(flat[i]);
          } else {
            plain_values.push_back(flat[i]);
          }
        }
        break;
      }
    }
    st.enc_count = enc_values.size();
    train_walls[static_cast<std::size_t>(c)] = seconds_since(t0);

    auto t1 = std::chrono::steady_clock::now();
    Upload upload;
    upload.client_id = static_cast<std::uint32_t>(st.id);
    upload.round = static_cast<std::uint32_t>(round);
    upload.ciphertexts =
        he::pack_encrypt(*fed.backend, fed.keys, enc_values, st.enc_rng);
    upload.plaintext_values = std::move(plain_values);
    st.upload = std::move(upload);
    encrypt_walls[static_cast<std::size_t>(c)] = seconds_since(t1);
  });

  const std::size_t enc_count = fed.clients.front().enc_count;
  const std::size_t plain_len = fed.clients.front().upload.plaintext_values.size();
  for (const ClientState& st : fed.clients) {
    if (st.enc_count != enc_count ||
        st.upload.plaintext_values.size() != plain_len) {
      throw ProtocolError("run_round: client " + std::to_string(st.id) +
                          " upload layout diverged");
    }
  }

  std::vector<Upload> uploads;
  uploads.reserve(static_cast<std::size_t>(k));
  for (ClientState& st : fed.clients) uploads.push_back(std::move(st.upload));

  auto t_agg = std::chrono::steady_clock::now();
  const Broadcast bc = aggregate(*fed.backend, uploads);
  const double aggregate_wall = seconds_since(t_agg);

  std::vector<double> decrypt_walls(static_cast<std::size_t>(k), 0.0);
  std::vector<double> update_walls(static_cast<std::size_t>(k), 0.0);
  parallel_for(k, threads, [&](int c) {
    ClientState& st = fed.clients[static_cast<std::size_t>(c)];
    auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> dec =
        he::decrypt_unpack(*fed.backend, fed.keys, bc.ciphertexts, enc_count);
    decrypt_walls[static_cast<std::size_t>(c)] = seconds_since(t0);

    auto t1 = std::chrono::steady_clock::now();
    switch (cfg.strategy) {
      case Strategy::kDictPfl: {
        const std::size_t table_part = (cfg.packing == PackingMode::kCompact)
                                           ? st.selection.indices.size()
                                           : static_cast<std::size_t>(fed.table_len);
        Vector g_full = Vector::Zero(fed.table_len);
        if (cfg.packing == PackingMode::kCompact) {
          for (std::size_t j = 0; j < table_part; ++j) {
            g_full[st.selection.indices[j]] = dec[j];
          }
        } else {
          for (std::size_t j = 0; j < table_part; ++j) {
            g_full[static_cast<Index>(j)] = dec[j];
          }
        }
        prme::hrc_update(st.prune, g_full);
        prme::push_history(st.prune, g_full);
        const std::vector<double> bias_part(dec.begin() + static_cast<std::ptrdiff_t>(table_part),
                                            dec.end());
        apply_table_and_bias(st.model, g_full, bias_part, cfg.lr);
        break;
      }
      case Strategy::kFedHeFull:
      case Strategy::kFedHeTopK: {
        apply_flat_update(st.model, dec, first, cfg.lr);
        break;
      }
      case Strategy::kSae: {
        std::vector<double> merged(fed.sae_mask.size());
        std::size_t ei = 0;
        std::size_t pi = 0;
        for (std::size_t i = 0; i < fed.sae_mask.size(); ++i) {
          merged[i] = fed.sae_mask[i] ? dec[ei++] : bc.plaintext_values[pi++];
        }
        apply_flat_update(st.model, merged, 0, cfg.lr);
        break;
      }
    }
    update_walls[static_cast<std::size_t>(c)] = seconds_since(t1);
  });

  // Byte accounting always prices the production-scale parameter set.
  const std::uint64_t acct_chunks =
      he::modeled_ciphertext_count(cfg.accounting, enc_count);
  const std::uint64_t ct_bytes = he::modeled_ciphertext_bytes(cfg.accounting);
  m.ciphertext_up_bytes = static_cast<std::uint64_t>(k) * acct_chunks * ct_bytes;
  m.ciphertext_down_bytes = acct_chunks * ct_bytes;
  m.plaintext_up_bytes = static_cast<std::uint64_t>(k) * plain_len * 8;
  m.plaintext_down_bytes = plain_len * 8;
  m.ciphertext_count = acct_chunks * static_cast<std::uint64_t>(k + 1);

  const std::uint64_t per_client_bytes = acct_chunks * ct_bytes + plain_len * 8;
  m.upload_s = per_client_bytes == 0
                   ? 0.0
                   : netsim::transfer_time(per_client_bytes, cfg.net);
  m.download_s = per_client_bytes == 0
                     ? 0.0
                     : netsim::transfer_time(acct_chunks * ct_bytes + plain_len * 8,
                                             cfg.net);

  if (cfg.timing == TimingMode::kSimulated) {
    const trainer::ToyModel& model0 = fed.clients.front().model;
    const std::uint64_t flops = trainer::train_flops(
        model0, fed.clients.front().shard.size(), cfg.local_epochs);
    m.local_train_s = static_cast<double>(flops) * cfg.cost.train_flop_s;
    m.encrypt_s = static_cast<double>(acct_chunks) * cfg.cost.encrypt_chunk_s;
    m.aggregate_s =
        static_cast<double>(k - 1) * static_cast<double>(acct_chunks) *
            cfg.cost.add_chunk_s +
        static_cast<double>(acct_chunks) * cfg.cost.scale_chunk_s;
    m.decrypt_s = static_cast<double>(acct_chunks) * cfg.cost.decrypt_chunk_s;
    m.update_s = static_cast<double>(enc_count + plain_len) *
                 cfg.cost.update_param_s;
  } else {
    m.local_train_s = *std::max_element(train_walls.begin(), train_walls.end());
    m.encrypt_s = *std::max_element(encrypt_walls.begin(), encrypt_walls.end());
    m.aggregate_s = aggregate_wall;
    m.decrypt_s = *std::max_element(decrypt_walls.begin(), decrypt_walls.end());
    m.update_s = *std::max_element(update_walls.begin(), update_walls.end());
  }

  const trainer::EvalResult ev = trainer::evaluate(
      fed.clients.front().model, fed.eval_features, fed.eval_labels);
  if (!std::isfinite(ev.loss)) {
    throw NumericalError("run_round: evaluation loss diverged");
  }
  m.loss = ev.loss;
  m.accuracy = ev.accuracy;

  ++fed.round;
  return m;
}

std::vector<RoundMetrics> run_rounds(Federation& fed, int rounds) {
  if (rounds < 0) throw ParameterError("run_rounds: negative round count");
  std::vector<RoundMetrics> all;
  all.reserve(static_cast<std::size_t>(rounds));
  for (int r = 0; r < rounds; ++r) all.push_back(run_round(fed));
  return all;
}

std::vector<RoundMetrics> run_baseline_full(SessionConfig config,
                                            const trainer::Dataset& dataset,
                                            int rounds) {
  config.strategy = Strategy::kFedHeFull;
  Federation fed = setup(config, dataset);
  return run_rounds(fed, rounds);
}

std::vector<RoundMetrics> run_baseline_topk(SessionConfig config,
                                            const trainer::Dataset& dataset,
                                            int rounds) {
  config.strategy = Strategy::kFedHeTopK;
  Federation fed = setup(config, dataset);
  return run_rounds(fed, rounds);
}

std::vector<RoundMetrics> run_baseline_sae(SessionConfig config,
                                           const trainer::Dataset& dataset,
                                           int rounds) {
  config.strategy = Strategy::kSae;
  Federation fed = setup(config, dataset);
  return run_rounds(fed, rounds);
}

}  // namespace dictpfl::protocol
