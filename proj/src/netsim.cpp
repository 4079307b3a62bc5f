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

#include "dictpfl/netsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

namespace dictpfl::netsim {

NetProfile NetProfile::lan() {
  return NetProfile{"lan", 1e9, 0.5e-3};
}

NetProfile NetProfile::wan() {
  return NetProfile{"wan", 100e6, 50e-3};
}

NetProfile NetProfile::named(std::string_view name) {
  if (name == "lan") return lan();
  if (name == "wan") return wan();
  throw ParameterError("unknown network profile '" + std::string(name) + "'");
}

double transfer_time(std::uint64_t bytes, double bandwidth_bps,
                     double latency_s) {
  if (!(bandwidth_bps > 0.0) || latency_s < 0.0) {
    throw ParameterError("transfer_time: invalid link parameters");
  }
  return latency_s + static_cast<double>(bytes) * 8.0 / bandwidth_bps;
}

double transfer_time(std::uint64_t bytes, const NetProfile& profile) {
  return transfer_time(bytes, profile.bandwidth_bps, profile.latency_s);
}

std::vector<LayerShape> parse_manifest(std::istream& in) {
  std::vector<LayerShape> layers;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream fields(line);
    LayerShape shape;
    if (!(fields >> shape.name)) continue;  // blank line
    if (!(fields >> shape.rows >> shape.cols) || shape.rows == 0 ||
        shape.cols == 0) {
      throw IoError("manifest line " + std::to_string(lineno) +
                    ": expected 'name rows cols' with positive dimensions");
    }
    std::string extra;
    if (fields >> extra) {
      throw IoError("manifest line " + std::to_string(lineno) +
                    ": trailing tokens");
    }
    layers.push_back(std::move(shape));
  }
  if (layers.empty()) {
    throw IoError("manifest: no layers");
  }
  return layers;
}

std::vector<LayerShape> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open manifest '" + path + "'");
  }
  return parse_manifest(in);
}

std::uint64_t total_elements(const std::vector<LayerShape>& layers) {
  std::uint64_t total = 0;
  for (const LayerShape& l : layers) total += l.rows * l.cols;
  return total;
}

DryRunReport dry_run(const std::vector<LayerShape>& layers,
                     const DryRunRequest& request) {
  if (layers.empty()) {
    throw ParameterError("dry_run: empty layer list");
  }
  if (request.clients < 1) {
    throw ParameterError("dry_run: clients must be >= 1");
  }
  if (request.rank < 1) {
    throw ParameterError("dry_run: rank must be >= 1");
  }
  if (request.prune_fraction < 0.0 || request.prune_fraction > 1.0) {
    throw ParameterError("dry_run: prune fraction outside [0, 1]");
  }
  if (request.sae_fraction < 0.0 || request.sae_fraction > 1.0) {
    throw ParameterError("dry_run: sensitive fraction outside [0, 1]");
  }
  if (request.strategy == Strategy::kFedHeTopK &&
      (request.topk_layers < 0 ||
       static_cast<std::size_t>(request.topk_layers) > layers.size())) {
    throw ParameterError("dry_run: top-k layer count outside [0, depth]");
  }
  request.accounting.validate();

  DryRunReport rep;
  rep.strategy = request.strategy;
  rep.clients = request.clients;
  rep.model_elements = total_elements(layers);
  rep.ciphertext_bytes_each = modeled_ciphertext_bytes(request.accounting);

  switch (request.strategy) {
    case Strategy::kFedHeFull: {
      rep.enc_elements_warmup = rep.model_elements;
      rep.enc_elements_steady = rep.model_elements;
      break;
    }
    case Strategy::kDictPfl: {
      std::uint64_t table = 0;
      for (const LayerShape& l : layers) {
        const std::uint64_t r_eff = std::min<std::uint64_t>(
            static_cast<std::uint64_t>(request.rank), std::min(l.rows, l.cols));
        if (r_eff < static_cast<std::uint64_t>(request.rank)) {
          rep.warnings.push_back("layer " + l.name + ": rank clamped to " +
                                 std::to_string(r_eff));
        }
        if (r_eff >= l.rows) {
          rep.warnings.push_back(
              "layer " + l.name +
              ": table no smaller than the dense weight at this rank");
        }
        table += r_eff * l.cols;
      }
      rep.enc_elements_warmup = table;
      rep.enc_elements_steady = static_cast<std::uint64_t>(std::llround(
          (1.0 - request.prune_fraction) * static_cast<double>(table)));
      if (rep.enc_elements_steady >= rep.model_elements) {
        rep.warnings.push_back(
            "steady-state upload not smaller than the dense model");
      }
      break;
    }
    case Strategy::kFedHeTopK: {
      std::uint64_t tail = 0;
      for (std::size_t i = layers.size() - static_cast<std::size_t>(request.topk_layers);
           i < layers.size(); ++i) {
        tail += layers[i].rows * layers[i].cols;
      }
      rep.enc_elements_warmup = tail;
      rep.enc_elements_steady = tail;
      break;
    }
    case Strategy::kSae: {
      const auto enc = static_cast<std::uint64_t>(std::llround(
          request.sae_fraction * static_cast<double>(rep.model_elements)));
      rep.enc_elements_warmup = enc;
      rep.enc_elements_steady = enc;
      rep.plain_elements = rep.model_elements - enc;
      break;
    }
  }

  rep.chunks_warmup =
      modeled_ciphertext_count(request.accounting, rep.enc_elements_warmup);
  rep.chunks_steady =
      modeled_ciphertext_count(request.accounting, rep.enc_elements_steady);
  const auto clients = static_cast<std::uint64_t>(request.clients);
  rep.up_bytes_warmup = clients * rep.chunks_warmup * rep.ciphertext_bytes_each;
  rep.up_bytes_steady = clients * rep.chunks_steady * rep.ciphertext_bytes_each;
  rep.down_bytes_warmup = rep.chunks_warmup * rep.ciphertext_bytes_each;
  rep.down_bytes_steady = rep.chunks_steady * rep.ciphertext_bytes_each;
  rep.plain_up_bytes = clients * rep.plain_elements * 8;
  rep.plain_down_bytes = rep.plain_elements * 8;
  return rep;
}

}  // namespace dictpfl::netsim
