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

#include "dictpfl/he.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "dictpfl/detail/wire.hpp"

namespace dictpfl::he {

namespace {

using detail::Reader;
using detail::Writer;

constexpr std::uint8_t kWireVersion = 1;
constexpr char kMockTag[] = "MOCK";
constexpr char kRlweTag[] = "RLWE";

void check_compatible(const Ciphertext& a, const Ciphertext& b) {
  if (a.backend_tag != b.backend_tag || a.params_digest != b.params_digest) {
    throw IncompatibilityError("ciphertext add: mismatched parameter sets");
  }
  if (a.chunk_index != b.chunk_index) {
    throw IncompatibilityError(
        "ciphertext add: chunk " + std::to_string(a.chunk_index) + " vs " +
        std::to_string(b.chunk_index));
  }
  if (a.slot_count != b.slot_count) {
    throw IncompatibilityError("ciphertext add: slot count mismatch");
  }
  if (a.scale != b.scale) {
    throw IncompatibilityError("ciphertext add: scale mismatch");
  }
}

// Largest encodable magnitude: leave 10 bits of headroom between the
// scaled value and the modulus so a few hundred summands never wrap.
double encode_bound(const HeParams& p) {
  const int exp =
      static_cast<int>(p.coeff_modulus_bits) - static_cast<int>(p.scale_bits) - 10;
  if (exp >= 1024) return std::numeric_limits<double>::infinity();
  return std::ldexp(1.0, exp);
}

class MockBackend final : public HeBackend {
 public:
  explicit MockBackend(const HeParams& params) : params_(params) {
    params_.validate();
  }

  std::string_view tag() const override { return kMockTag; }
  const HeParams& params() const override { return params_; }

  KeyPair keygen(std::uint64_t seed) const override {
    KeyPair kp;
    kp.params_digest = params_.digest();
    kp.secret = {static_cast<std::int8_t>(splitmix64(seed) & 1)};
    return kp;
  }

  Ciphertext encrypt_chunk(const KeyPair& keys, std::span<const double> values,
                           std::uint32_t chunk_index, Rng& rng) const override {
    (void)keys;
    (void)rng;
    if (values.size() > params_.slots()) {
      throw EncodingError("encrypt_chunk: more values than slots");
    }
    Ciphertext ct;
    ct.backend_tag = kMockTag;
    ct.params_digest = params_.digest();
    ct.chunk_index = chunk_index;
    ct.slot_count = static_cast<std::uint32_t>(values.size());
    ct.scale = 1.0;
    ct.mock_values.assign(values.begin(), values.end());
    return ct;
  }

  std::vector<double> decrypt_chunk(const KeyPair& keys,
                                    const Ciphertext& ct) const override {
    (void)keys;
    if (ct.backend_tag != kMockTag || ct.params_digest != params_.digest()) {
      throw IncompatibilityError("decrypt_chunk: foreign ciphertext");
    }
    return ct.mock_values;
  }

  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const override {
    check_compatible(a, b);
    Ciphertext out = a;
    for (std::size_t i = 0; i < out.mock_values.size(); ++i) {
      out.mock_values[i] += b.mock_values[i];
    }
    return out;
  }

  Ciphertext scale_plain(const Ciphertext& ct, double factor) const override {
    Ciphertext out = ct;
    for (double& v : out.mock_values) v *= factor;
    return out;
  }

 private:
  HeParams params_;
};

// Additive scheme over Z_q[X]/(X^N + 1) with a power-of-two modulus, a
// ternary secret and centered-binomial noise. Values are fixed-point
// encoded into the first N/2 coefficients; coefficient-wise addition then
// matches slot-wise addition of the packed vectors. The structure follows
// standard RLWE public-key encryption, but the parameters are toy-sized
// and the modulus choice favors exact wrap-around arithmetic over
// security. Not an implementation to protect real data with.
class ToyRlweBackend final : public HeBackend {
 public:
  explicit ToyRlweBackend(const HeParams& params) : params_(params) {
    params_.validate();
    if (params_.log2_ring_dim > 14) {
      throw ParameterError("toy rlwe: ring dimension above 2^14");
    }
    if (params_.coeff_modulus_bits > 62) {
      throw ParameterError("toy rlwe: modulus above 62 bits");
    }
    if (params_.scale_bits < 8 ||
        params_.scale_bits + 16 > params_.coeff_modulus_bits) {
      throw ParameterError("toy rlwe: scale leaves no noise headroom");
    }
    n_ = params_.ring_dim();
    mask_ = (std::uint64_t{1} << params_.coeff_modulus_bits) - 1;
  }

  std::string_view tag() const override { return kRlweTag; }
  const HeParams& params() const override { return params_; }

  KeyPair keygen(std::uint64_t seed) const override {
    Rng rng = Rng::stream(seed, streams::kKeygen);
    KeyPair kp;
    kp.params_digest = params_.digest();
    kp.secret = ternary(rng);
    std::vector<std::uint64_t> a(n_);
    for (auto& c : a) c = rng.next_u64() & mask_;
    std::vector<std::uint64_t> as = mult_ternary(a, kp.secret);
    kp.public0.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      kp.public0[i] = (0 - as[i] + noise(rng)) & mask_;
    }
    kp.public1 = std::move(a);
    return kp;
  }

  Ciphertext encrypt_chunk(const KeyPair& keys, std::span<const double> values,
                           std::uint32_t chunk_index, Rng& rng) const override {
    if (keys.params_digest != params_.digest()) {
      throw IncompatibilityError("encrypt_chunk: key from foreign parameters");
    }
    if (values.size() > params_.slots()) {
      throw EncodingError("encrypt_chunk: more values than slots");
    }
    const double scale = std::ldexp(1.0, static_cast<int>(params_.scale_bits));
    std::vector<std::uint64_t> m(n_, 0);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto fixed = static_cast<std::int64_t>(std::llround(values[i] * scale));
      m[i] = static_cast<std::uint64_t>(fixed) & mask_;
    }
    const std::vector<std::int8_t> v = ternary(rng);
    Ciphertext ct;
    ct.backend_tag = kRlweTag;
    ct.params_digest = params_.digest();
    ct.chunk_index = chunk_index;
    ct.slot_count = static_cast<std::uint32_t>(values.size());
    ct.scale = scale;
    ct.poly0 = mult_ternary(keys.public0, v);
    ct.poly1 = mult_ternary(keys.public1, v);
    for (std::size_t i = 0; i < n_; ++i) {
      ct.poly0[i] = (ct.poly0[i] + noise(rng) + m[i]) & mask_;
      ct.poly1[i] = (ct.poly1[i] + noise(rng)) & mask_;
    }
    return ct;
  }

  std::vector<double> decrypt_chunk(const KeyPair& keys,
                                    const Ciphertext& ct) const override {
    if (ct.backend_tag != kRlweTag || ct.params_digest != params_.digest()) {
      throw IncompatibilityError("decrypt_chunk: foreign ciphertext");
    }
    if (keys.secret.size() != n_) {
      throw IncompatibilityError("decrypt_chunk: key size mismatch");
    }
    const std::vector<std::uint64_t> c1s = mult_ternary(ct.poly1, keys.secret);
    const int lift = 64 - static_cast<int>(params_.coeff_modulus_bits);
    std::vector<double> out(ct.slot_count);
    for (std::size_t i = 0; i < ct.slot_count; ++i) {
      const std::uint64_t d = (ct.poly0[i] + c1s[i]) & mask_;
      // Centered representative via integer sign extension; exact, unlike
      // lifting through double for wide moduli.
      const auto centered = static_cast<std::int64_t>(d << lift) >> lift;
      out[i] = static_cast<double>(centered) / ct.scale;
    }
    return out;
  }

  Ciphertext add(const Ciphertext& a, const Ciphertext& b) const override {
    check_compatible(a, b);
    Ciphertext out = a;
    for (std::size_t i = 0; i < n_; ++i) {
      out.poly0[i] = (a.poly0[i] + b.poly0[i]) & mask_;
      out.poly1[i] = (a.poly1[i] + b.poly1[i]) & mask_;
    }
    return out;
  }

  Ciphertext scale_plain(const Ciphertext& ct, double factor) const override {
    if (factor == 0.0 || !std::isfinite(factor)) {
      throw ParameterError("scale_plain: factor must be finite and nonzero");
    }
    // Scaling by 1/f is folded into the tracked encoding scale, so the
    // ring elements stay untouched and no precision is lost to requantizing.
    Ciphertext out = ct;
    out.scale = ct.scale / factor;
    return out;
  }

 private:
  std::vector<std::int8_t> ternary(Rng& rng) const {
    std::vector<std::int8_t> t(n_);
    for (auto& v : t) v = static_cast<std::int8_t>(rng.below(3)) - 1;
    return t;
  }

  std::uint64_t noise(Rng& rng) const {
    const std::uint64_t bits = rng.next_u64();
    const auto e = static_cast<std::int64_t>((bits & 1) + ((bits >> 1) & 1)) -
                   static_cast<std::int64_t>(((bits >> 2) & 1) + ((bits >> 3) & 1));
    return static_cast<std::uint64_t>(e) & mask_;
  }

  // Negacyclic product of a ring element with a ternary polynomial. Only
  // nonzero ternary positions contribute, each as a shifted add/subtract,
  // so the cost is about 2N^2/3 additions and no multiplies.
  std::vector<std::uint64_t> mult_ternary(const std::vector<std::uint64_t>& a,
                                          const std::vector<std::int8_t>& t) const {
    std::vector<std::uint64_t> res(n_, 0);
    for (std::size_t i = 0; i < n_; ++i) {
      if (t[i] == 0) continue;
      if (t[i] > 0) {
        for (std::size_t k = 0; k + i < n_; ++k) res[i + k] += a[k];
        for (std::size_t k = n_ - i; k < n_; ++k) res[i + k - n_] -= a[k];
      } else {
        for (std::size_t k = 0; k + i < n_; ++k) res[i + k] -= a[k];
        for (std::size_t k = n_ - i; k < n_; ++k) res[i + k - n_] += a[k];
      }
    }
    for (auto& c : res) c &= mask_;
    return res;
  }

  HeParams params_;
  std::size_t n_ = 0;
  std::uint64_t mask_ = 0;
};

}  // namespace

void HeParams::validate() const {
  if (log2_ring_dim < 4 || log2_ring_dim > 20) {
    throw ParameterError("HeParams: log2 ring dimension outside [4, 20]");
  }
  if (coeff_modulus_bits < 16 || coeff_modulus_bits > 8192) {
    throw ParameterError("HeParams: coefficient modulus bits outside [16, 8192]");
  }
  if (scale_bits < 1 || scale_bits >= coeff_modulus_bits) {
    throw ParameterError("HeParams: scale bits must lie in [1, modulus bits)");
  }
  if (!(noise_tolerance > 0.0)) {
    throw ParameterError("HeParams: noise tolerance must be positive");
  }
}

std::uint64_t HeParams::digest() const {
  Writer w;
  w.u32(log2_ring_dim);
  w.u32(coeff_modulus_bits);
  w.u32(scale_bits);
  return detail::fnv1a(w.bytes());
}

HeParams HeParams::toy() { return HeParams{}; }

HeParams HeParams::accounting() {
  HeParams p;
  p.log2_ring_dim = 16;
  p.coeff_modulus_bits = 1555;
  p.scale_bits = 40;
  return p;
}

std::uint64_t modeled_ciphertext_bytes(const HeParams& params) {
  const std::uint64_t coeff_bytes = (params.coeff_modulus_bits + 7) / 8;
  return 2 * params.ring_dim() * coeff_bytes;
}

std::uint64_t modeled_ciphertext_count(const HeParams& params,
                                       std::uint64_t element_count) {
  const std::uint64_t slots = params.slots();
  return (element_count + slots - 1) / slots;
}

std::uint64_t modeled_upload_bytes(const HeParams& params,
                                   std::uint64_t element_count) {
  return modeled_ciphertext_count(params, element_count) *
         modeled_ciphertext_bytes(params);
}

Backend parse_backend(std::string_view name) {
  if (name == "mock") return Backend::kMock;
  if (name == "rlwe") return Backend::kToyRlwe;
  throw ParameterError("unknown backend '" + std::string(name) + "'");
}

std::string_view to_string(Backend backend) {
  return backend == Backend::kMock ? "mock" : "rlwe";
}

std::unique_ptr<HeBackend> make_backend(Backend backend, const HeParams& params) {
  if (backend == Backend::kMock) {
    return std::make_unique<MockBackend>(params);
  }
  return std::make_unique<ToyRlweBackend>(params);
}

std::vector<std::uint8_t> serialize(const Ciphertext& ct) {
  Writer w;
  w.tag(ct.backend_tag == kMockTag ? kMockTag : kRlweTag);
  w.u8(kWireVersion);
  w.u64(ct.params_digest);
  w.u32(ct.chunk_index);
  w.u32(ct.slot_count);
  w.f64(ct.scale);
  if (ct.backend_tag == kMockTag) {
    w.u32(static_cast<std::uint32_t>(ct.mock_values.size()));
    for (double v : ct.mock_values) w.f64(v);
  } else {
    w.u32(static_cast<std::uint32_t>(ct.poly0.size()));
    for (std::uint64_t c : ct.poly0) w.u64(c);
    for (std::uint64_t c : ct.poly1) w.u64(c);
  }
  return detail::frame(w.take());
}

Ciphertext parse_ciphertext(std::span<const std::uint8_t> bytes) {
  Reader r(detail::unframe(bytes));
  Ciphertext ct;
  ct.backend_tag = r.tag();
  if (ct.backend_tag != kMockTag && ct.backend_tag != kRlweTag) {
    throw EncodingError("ciphertext parse: unknown backend tag");
  }
  if (r.u8() != kWireVersion) {
    throw EncodingError("ciphertext parse: unsupported version");
  }
  ct.params_digest = r.u64();
  ct.chunk_index = r.u32();
  ct.slot_count = r.u32();
  ct.scale = r.f64();
  const std::uint32_t n = r.u32();
  if (ct.backend_tag == kMockTag) {
    ct.mock_values.resize(n);
    for (auto& v : ct.mock_values) v = r.f64();
  } else {
    ct.poly0.resize(n);
    ct.poly1.resize(n);
    for (auto& c : ct.poly0) c = r.u64();
    for (auto& c : ct.poly1) c = r.u64();
  }
  if (!r.done()) {
    throw EncodingError("ciphertext parse: trailing bytes");
  }
  return ct;
}

std::vector<Ciphertext> pack_encrypt(const HeBackend& backend,
                                     const KeyPair& keys,
                                     std::span<const double> values, Rng& rng) {
  const double bound = encode_bound(backend.params());
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw EncodingError("pack_encrypt: non-finite value");
    }
    if (std::abs(v) > bound) {
      throw EncodingError("pack_encrypt: magnitude exceeds scheme headroom");
    }
  }
  const std::uint64_t slots = backend.params().slots();
  std::vector<Ciphertext> chunks;
  std::uint32_t index = 0;
  for (std::size_t off = 0; off < values.size(); off += slots, ++index) {
    const std::size_t len = std::min<std::size_t>(slots, values.size() - off);
    chunks.push_back(backend.encrypt_chunk(keys, values.subspan(off, len), index, rng));
  }
  return chunks;
}

std::vector<double> decrypt_unpack(const HeBackend& backend,
                                   const KeyPair& keys,
                                   const std::vector<Ciphertext>& chunks,
                                   std::size_t count) {
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (chunks[i].chunk_index != i) {
      throw IncompatibilityError("decrypt_unpack: chunk sequence gap");
    }
    const std::vector<double> vals = backend.decrypt_chunk(keys, chunks[i]);
    out.insert(out.end(), vals.begin(), vals.end());
  }
  if (out.size() != count) {
    throw ShapeError("decrypt_unpack: expected " + std::to_string(count) +
                     " values, got " + std::to_string(out.size()));
  }
  return out;
}

}  // namespace dictpfl::he
