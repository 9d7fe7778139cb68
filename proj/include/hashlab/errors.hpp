// Copyright 2026 The hashlab Authors.
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

#include <stdexcept>
#include <string>

namespace hashlab {

/// Process exit codes shared by every CLI subcommand.
enum class ExitCode : int {
  kOk = 0,
  kConfig = 1,
  kData = 2,
  kNumeric = 3,
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual ExitCode exit_code() const noexcept { return ExitCode::kConfig; }
};

/// Invalid configuration, bad architecture, or shape mismatch between layers.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a documented precondition (e.g. a shadow code that is not +-1).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or inconsistent input files.
class DataError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kData; }
};

/// NaN/Inf encountered in a loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
  ExitCode exit_code() const noexcept override { return ExitCode::kNumeric; }
};

}  // namespace hashlab
