// Copyright 2026 The fasgd-sim Authors. All Rights Reserved.
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

namespace fasgd {

// Base class for everything the simulator throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration: length mismatches, invalid keys, violated constraints.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or corrupted statistics.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A server policy was driven in a way the protocol forbids.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

// Malformed or unreadable dataset files.
class IngestionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Raised by the dispatcher when a step fails; carries the trace position.
class SimulationError : public Error {
 public:
  SimulationError(long long iteration, const std::string& what, bool numeric)
      : Error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration),
        numeric_(numeric) {}

  long long iteration() const noexcept { return iteration_; }
  // True when the underlying cause was a NumericError (divergence).
  bool numeric() const noexcept { return numeric_; }

 private:
  long long iteration_;
  bool numeric_;
};

}  // namespace fasgd
