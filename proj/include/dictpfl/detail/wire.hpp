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

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dictpfl/errors.hpp"

// Little-endian wire helpers shared by the ciphertext and protocol message
// encodings. Message bodies are framed as [u32 length][body][u64 fnv1a],
// so truncation and bit flips both surface as EncodingError at parse time.

namespace dictpfl::detail {

inline std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void tag(const char* t) {
    for (int i = 0; i < 4; ++i) {
      out_.push_back(static_cast<std::uint8_t>(t[i]));
    }
  }
  void raw(std::span<const std::uint8_t> bytes) {
    out_.insert(out_.end(), bytes.begin(), bytes.end());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  const std::vector<std::uint8_t>& bytes() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}
  std::uint8_t u8() { return take(1)[0]; }
  std::uint32_t u32() {
    auto b = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string tag() {
    auto b = take(4);
    return std::string(reinterpret_cast<const char*>(b.data()), 4);
  }
  std::span<const std::uint8_t> raw(std::size_t n) { return take(n); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> take(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw EncodingError("parse: truncated buffer");
    }
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

/// Wraps a body as [u32 len][body][u64 checksum].
inline std::vector<std::uint8_t> frame(std::vector<std::uint8_t> body) {
  Writer framed;
  framed.u32(static_cast<std::uint32_t>(body.size()));
  framed.raw(body);
  framed.u64(fnv1a(body));
  return framed.take();
}

/// Validates an exact frame and returns its body view.
inline std::span<const std::uint8_t> unframe(
    std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12) {
    throw EncodingError("parse: buffer shorter than a frame");
  }
  Reader header(bytes);
  const std::uint32_t body_len = header.u32();
  if (bytes.size() != 4 + static_cast<std::size_t>(body_len) + 8) {
    throw EncodingError("parse: frame length mismatch");
  }
  const auto body = bytes.subspan(4, body_len);
  Reader tail(bytes.subspan(4 + body_len));
  if (tail.u64() != fnv1a(body)) {
    throw EncodingError("parse: checksum mismatch");
  }
  return body;
}

}  // namespace dictpfl::detail
