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

#include <stdexcept>
#include <string>

namespace dictpfl {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or length mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (out-of-range fraction, empty input, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: non-convergence, NaN loss, overflow.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Value cannot be encoded into ciphertext slots.
class EncodingError : public Error {
 public:
  using Error::Error;
};

/// Ciphertexts from incompatible parameter sets or chunk positions.
class IncompatibilityError : public Error {
 public:
  using Error::Error;
};

/// Round-level protocol violation (e.g. chunk-count mismatch between
/// clients); aborts the round.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// File read/write failure or malformed on-disk format.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dictpfl
