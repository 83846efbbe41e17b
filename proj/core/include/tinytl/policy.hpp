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

#ifndef TINYTL_POLICY_HPP_
#define TINYTL_POLICY_HPP_

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "tinytl/model.hpp"
#include "tinytl/tape.hpp"

namespace tinytl {

enum class PolicyKind { kFTFull, kFTLast, kFTNormLast, kTinyTLB, kTinyTLL, kTinyTLLB, kCustom };

// Which parameter groups are trained. The head is trainable under every
// policy.
class FineTunePolicy {
 public:
  FineTunePolicy() = default;
  explicit FineTunePolicy(PolicyKind kind);

  // Custom set; the head is added implicitly.
  static FineTunePolicy custom(std::set<ParamGroup> groups);
  // Group names: weight, bias, norm, lite, head.
  static FineTunePolicy custom(const std::vector<std::string>& group_names);
  // CLI names: ft-full, ft-last, ft-norm-last, tinytl-b, tinytl-l, tinytl-lb.
  static FineTunePolicy parse(const std::string& name);

  PolicyKind kind() const { return kind_; }
  const std::set<ParamGroup>& groups() const { return groups_; }
  bool trains(ParamGroup g) const { return groups_.count(g) != 0; }
  std::string name() const;

 private:
  PolicyKind kind_ = PolicyKind::kFTLast;
  std::set<ParamGroup> groups_{ParamGroup::kHead};
};

// The six named policies in canonical order.
std::vector<FineTunePolicy> named_policies();

ParamGroup parse_group(const std::string& name);

struct TrainablePlan {
  std::int64_t trainable_scalars = 0;
  std::int64_t frozen_scalars = 0;
  std::vector<std::string> trainable;  // parameter names
};

// Sets `trainable` on every parameter the model references and returns the
// resulting counts. Shared supernet tensors are updated in place.
template <typename T>
TrainablePlan apply_policy(const BasicModel<T>& model, const FineTunePolicy& policy);

}  // namespace tinytl

#endif  // TINYTL_POLICY_HPP_
