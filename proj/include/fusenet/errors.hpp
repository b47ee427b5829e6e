// Copyright 2026 The FuseNet Authors.
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

namespace fusenet {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor or layer dimensions do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on a scalar argument was violated.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line()` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint could not be read back. `field()` names the offending entry.
class ModelFileError : public Error {
 public:
  ModelFileError(const std::string& field, const std::string& what)
      : Error(field + ": " + what), field_(field) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Attention received a sequence whose every position is masked.
class NoAttendablePositions : public Error {
 public:
  using Error::Error;
};

/// Training diverged (non-finite loss or gradient).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace fusenet
