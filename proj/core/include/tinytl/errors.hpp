// Copyright 2026 The tinytl Authors.
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

#ifndef TINYTL_ERRORS_HPP_
#define TINYTL_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace tinytl {

// Shapes that do not conform for an op.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// An architecture, layer, policy or search description that breaks its
// invariants.
class SpecError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed tape or model graph.
class StructuralError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// NaN/Inf where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an API contract (e.g. a missing gradient for a trainable
// parameter).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// An internal invariant failed. Reaching this is a bug.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace tinytl

#endif  // TINYTL_ERRORS_HPP_
