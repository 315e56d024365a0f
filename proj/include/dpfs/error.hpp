// Copyright 2026 The dpfs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DPFS_ERROR_H_
#define DPFS_ERROR_H_

#include <stdexcept>
#include <string>

namespace dpfs {

// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file (bad JSONL line, bad TOML, empty dataset).
class ParseError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or argument combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Requested label is not present in a fixed-set dataset.
class UnknownLabelError : public Error {
 public:
  using Error::Error;
};

// Pool too small for the requested subsample (|pool| < M*N) or for an
// attack trial.
class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

// A probability vector carries no mass on the allowed support.
class DegenerateSupportError : public Error {
 public:
  using Error::Error;
};

// Remote LM transport or provider failure after exhausting retries.
class RemoteError : public Error {
 public:
  using Error::Error;
};

// Noise calibration could not bracket the target budget.
class CalibrationError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpfs

#endif  // DPFS_ERROR_H_
