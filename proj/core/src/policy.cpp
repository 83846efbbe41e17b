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

#include "tinytl/policy.hpp"

#include "tinytl/errors.hpp"

namespace tinytl {
namespace {

std::set<ParamGroup> groups_of(PolicyKind kind) {
  using G = ParamGroup;
  switch (kind) {
    case PolicyKind::kFTFull: return {G::kWeight, G::kBias, G::kNorm, G::kLite, G::kHead};
    case PolicyKind::kFTLast: return {G::kHead};
    case PolicyKind::kFTNormLast: return {G::kNorm, G::kHead};
    case PolicyKind::kTinyTLB: return {G::kBias, G::kHead};
    case PolicyKind::kTinyTLL: return {G::kLite, G::kHead};
    case PolicyKind::kTinyTLLB: return {G::kBias, G::kLite, G::kHead};
    case PolicyKind::kCustom: break;
  }
  return {G::kHead};
}

}  // namespace

FineTunePolicy::FineTunePolicy(PolicyKind kind) : kind_(kind), groups_(groups_of(kind)) {}

FineTunePolicy FineTunePolicy::custom(std::set<ParamGroup> groups) {
  FineTunePolicy p;
  p.kind_ = PolicyKind::kCustom;
  groups.insert(ParamGroup::kHead);
  p.groups_ = std::move(groups);
  return p;
}

FineTunePolicy FineTunePolicy::custom(const std::vector<std::string>& group_names) {
  std::set<ParamGroup> groups;
  for (const auto& n : group_names) groups.insert(parse_group(n));
  return custom(std::move(groups));
}

ParamGroup parse_group(const std::string& name) {
  if (name == "weight") return ParamGroup::kWeight;
  if (name == "bias") return ParamGroup::kBias;
  if (name == "norm") return ParamGroup::kNorm;
  if (name == "lite") return ParamGroup::kLite;
  if (name == "head") return ParamGroup::kHead;
  throw SpecError("unknown parameter group '" + name + "'");
}

FineTunePolicy FineTunePolicy::parse(const std::string& name) {
  if (name == "ft-full") return FineTunePolicy(PolicyKind::kFTFull);
  if (name == "ft-last") return FineTunePolicy(PolicyKind::kFTLast);
  if (name == "ft-norm-last") return FineTunePolicy(PolicyKind::kFTNormLast);
  if (name == "tinytl-b") return FineTunePolicy(PolicyKind::kTinyTLB);
  if (name == "tinytl-l") return FineTunePolicy(PolicyKind::kTinyTLL);
  if (name == "tinytl-lb") return FineTunePolicy(PolicyKind::kTinyTLLB);
  if (name.rfind("custom:", 0) == 0) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : name.substr(7)) {
      if (c == '+' || c == ',') {
        if (!cur.empty()) parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) parts.push_back(cur);
    return custom(parts);
  }
  throw SpecError("unknown policy '" + name + "'");
}

std::string FineTunePolicy::name() const {
  switch (kind_) {
    case PolicyKind::kFTFull: return "ft-full";
    case PolicyKind::kFTLast: return "ft-last";
    case PolicyKind::kFTNormLast: return "ft-norm-last";
    case PolicyKind::kTinyTLB: return "tinytl-b";
    case PolicyKind::kTinyTLL: return "tinytl-l";
    case PolicyKind::kTinyTLLB: return "tinytl-lb";
    case PolicyKind::kCustom: break;
  }
  std::string out = "custom:";
  bool first = true;
  for (ParamGroup g : groups_) {
    if (!first) out += '+';
    out += to_string(g);
    first = false;
  }
  return out;
}

std::vector<FineTunePolicy> named_policies() {
  return {FineTunePolicy(PolicyKind::kFTFull),   FineTunePolicy(PolicyKind::kFTLast),
          FineTunePolicy(PolicyKind::kFTNormLast), FineTunePolicy(PolicyKind::kTinyTLB),
          FineTunePolicy(PolicyKind::kTinyTLL),  FineTunePolicy(PolicyKind::kTinyTLLB)};
}

template <typename T>
TrainablePlan apply_policy(const BasicModel<T>& model, const FineTunePolicy& policy) {
  TrainablePlan plan;
  for (const auto& p : model.parameters()) p->trainable = policy.trains(p->group);
  for (const auto& r : model.refs()) {
    if (!r.valid()) continue;
    if (r.trainable()) {
      plan.trainable_scalars += r.shape().numel();
      plan.trainable.push_back(r.name());
    } else {
      plan.frozen_scalars += r.shape().numel();
    }
  }
  return plan;
}

template TrainablePlan apply_policy(const BasicModel<float>&, const FineTunePolicy&);
template TrainablePlan apply_policy(const BasicModel<double>&, const FineTunePolicy&);

}  // namespace tinytl
