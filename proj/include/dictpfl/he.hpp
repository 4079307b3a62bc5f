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
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "dictpfl/errors.hpp"
#include "dictpfl/rng.hpp"

namespace dictpfl::he {

/// Lattice-style parameter set. The same struct serves two roles: the toy
/// backend actually computes with it, and the accounting profile (a large
/// production-grade set) only feeds the ciphertext size model.
struct HeParams {
  std::uint32_t log2_ring_dim = 10;
  std::uint32_t coeff_modulus_bits = 60;
  std::uint32_t scale_bits = 30;
  double noise_tolerance = 1e-3;  // absolute decrypt error budget

  std::uint64_t ring_dim() const { return std::uint64_t{1} << log2_ring_dim; }
  std::uint64_t slots() const { return ring_dim() / 2; }
  void validate() const;
  std::uint64_t digest() const;

  /// Small set the toy scheme can evaluate quickly.
  static HeParams toy();
  /// Production-scale set used only for sizes: ring dimension 2^16 with a
  /// 1555-bit coefficient modulus.
  static HeParams accounting();
};

/// Modeled wire size of one ciphertext: two ring elements, each holding
/// ring_dim coefficients of ceil(coeff_modulus_bits / 8) bytes.
std::uint64_t modeled_ciphertext_bytes(const HeParams& params);

/// Modeled bytes for a packed vector of `element_count` values:
/// ceil(element_count / slots) ciphertexts. Zero elements cost zero bytes.
std::uint64_t modeled_ciphertext_count(const HeParams& params,
                                       std::uint64_t element_count);
std::uint64_t modeled_upload_bytes(const HeParams& params,
                                   std::uint64_t element_count);

/// One packed chunk. Exactly one payload variant is populated, named by
/// backend_tag.
struct Ciphertext {
  std::string backend_tag;        // "MOCK" or "RLWE"
  std::uint64_t params_digest = 0;
  std::uint32_t chunk_index = 0;
  std::uint32_t slot_count = 0;   // packed values in this chunk
  double scale = 1.0;             // encoding scale; tracks plain scaling
  std::vector<double> mock_values;
  std::vector<std::uint64_t> poly0;
  std::vector<std::uint64_t> poly1;
};

/// Framed little-endian encoding with a trailing FNV-1a checksum; parse
/// rejects truncation, tag or version mismatch, and any flipped payload
/// byte with EncodingError.
std::vector<std::uint8_t> serialize(const Ciphertext& ct);
Ciphertext parse_ciphertext(std::span<const std::uint8_t> bytes);

struct KeyPair {
  std::uint64_t params_digest = 0;
  std::vector<std::int8_t> secret;     // ternary secret key
  std::vector<std::uint64_t> public0;  // -(a * secret) + noise
  std::vector<std::uint64_t> public1;  // a
};

enum class Backend { kMock, kToyRlwe };
Backend parse_backend(std::string_view name);
std::string_view to_string(Backend backend);

/// Additive homomorphic backend over packed real vectors.
///
/// decrypt(add(enc(x), enc(y))) ~= x + y and decrypt(scale(enc(x), c))
/// ~= c * x, within params().noise_tolerance per slot. Decrypting with a
/// key from a different keygen seed yields garbage values, not an error.
class HeBackend {
 public:
  virtual ~HeBackend() = default;
  virtual std::string_view tag() const = 0;
  virtual const HeParams& params() const = 0;

  /// Deterministic: the same seed reproduces the same key material.
  virtual KeyPair keygen(std::uint64_t seed) const = 0;

  virtual Ciphertext encrypt_chunk(const KeyPair& keys,
                                   std::span<const double> values,
                                   std::uint32_t chunk_index,
                                   Rng& rng) const = 0;
  virtual std::vector<double> decrypt_chunk(const KeyPair& keys,
                                            const Ciphertext& ct) const = 0;

  /// Slot-wise sum. Operands must come from the same parameter set, chunk
  /// position, slot count and scale; throws IncompatibilityError otherwise.
  virtual Ciphertext add(const Ciphertext& a, const Ciphertext& b) const = 0;

  /// Multiplies every packed value by a plaintext scalar.
  virtual Ciphertext scale_plain(const Ciphertext& ct, double factor) const = 0;
};

std::unique_ptr<HeBackend> make_backend(Backend backend, const HeParams& params);

/// Splits a vector into slot-sized chunks and encrypts each. Values must
/// be finite and bounded by the scheme headroom (throws EncodingError).
/// An empty input produces an empty chunk list.
std::vector<Ciphertext> pack_encrypt(const HeBackend& backend,
                                     const KeyPair& keys,
                                     std::span<const double> values, Rng& rng);

/// Inverse of pack_encrypt: expects chunks 0..k-1 in order covering exactly
/// `count` values (IncompatibilityError on gaps or foreign parameter sets,
/// ShapeError on a count mismatch).
std::vector<double> decrypt_unpack(const HeBackend& backend,
                                   const KeyPair& keys,
                                   const std::vector<Ciphertext>& chunks,
                                   std::size_t count);

}  // namespace dictpfl::he
