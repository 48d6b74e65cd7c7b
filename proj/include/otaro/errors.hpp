// Copyright 2026 The otaro Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace otaro {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument is outside its documented domain.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity was found where finite values are required.
class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t index, const std::string& what)
      : Error(what + " (non-finite value at index " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A group's shared exponent does not fit in the configured exponent field.
class ExponentOverflow : public Error {
 public:
  using Error::Error;
};

/// A bandit arm was scored before its warm-up pull.
class WarmupRequired : public Error {
 public:
  using Error::Error;
};

/// Cosine similarity requested between two zero vectors.
class UndefinedCosine : public Error {
 public:
  using Error::Error;
};

/// Training loss blew past the divergence guard.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unreadable serialized data.
class FormatError : public Error {
 public:
  enum class Kind { bad_magic, truncated, unknown_version, inconsistent, io };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace otaro
