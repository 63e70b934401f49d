// Copyright 2026 The Interflow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef INTERFLOW_ERROR_HPP_
#define INTERFLOW_ERROR_HPP_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace interflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible with the requested operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A binary file could not be parsed. `offset()` is the byte offset of the
/// failing field (or the start of the failing record).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Invalid experiment configuration. `line()` is 1-based, 0 when the error
/// came from a command-line override rather than a file line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}

  int line() const { return line_; }

 private:
  int line_;
};

/// A NaN or infinity showed up where finite values are required.
class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t index)
      : Error(what + " (coordinate " + std::to_string(index) + ")"),
        index_(index) {}

  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Training was stopped because the loss became non-finite.
class TrainingAborted : public Error {
 public:
  TrainingAborted(int epoch, int batch)
      : Error("non-finite loss at epoch " + std::to_string(epoch) +
              ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_;
  int batch_;
};

}  // namespace interflow

#endif  // INTERFLOW_ERROR_HPP_
