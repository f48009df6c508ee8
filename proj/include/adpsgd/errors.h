// Copyright 2026 The ADP-SGD Authors
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
#ifndef ADPSGD_ERRORS_H_
#define ADPSGD_ERRORS_H_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace adpsgd {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument or parameter outside the domain of a formula.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A hypothesis of a lemma or theorem does not hold for the given inputs
// (e.g. a per-step epsilon >= 1 fed to composition, or T too small for a
// utility bound). The CLI maps this family to exit code 2.
class HypothesisViolation : public Error {
 public:
  using Error::Error;
};

// The per-iteration constraint of noise calibration fails at iteration
// `iteration` (1-based, first offending index).
class ConstraintViolation : public HypothesisViolation {
 public:
  ConstraintViolation(const std::string& what, std::int64_t iteration)
      : HypothesisViolation(what), iteration_(iteration) {}
  std::int64_t iteration() const { return iteration_; }

 private:
  std::int64_t iteration_;
};

class IncompatibleSchedule : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace adpsgd

#endif  // ADPSGD_ERRORS_H_
