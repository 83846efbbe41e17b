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

#include "tinytl/tape.hpp"

#include <atomic>
#include <string>

namespace tinytl {

const char* to_string(StorageKind kind) {
  switch (kind) {
    case StorageKind::kFull32: return "full32";
    case StorageKind::kBitMask: return "bitmask";
    case StorageKind::kNone: return "none";
  }
  return "?";
}

const char* to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::kWeight: return "weight";
    case ParamGroup::kBias: return "bias";
    case ParamGroup::kNorm: return "norm";
    case ParamGroup::kLite: return "lite";
    case ParamGroup::kHead: return "head";
  }
  return "?";
}

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kLinear: return "linear";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kGroupNorm: return "group_norm";
    case OpKind::kFrozenBatchNorm: return "frozen_batch_norm";
    case OpKind::kBiasAdd: return "bias_add";
    case OpKind::kReLU: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kHSwish: return "hswish";
    case OpKind::kAvgPool2: return "avg_pool2";
    case OpKind::kUpsample: return "bilinear_upsample";
    case OpKind::kGlobalAvgPool: return "global_avg_pool";
    case OpKind::kAdd: return "add";
  }
  return "?";
}

// ---- ParamRef ---------------------------------------------------------------

template <typename T>
ParamRef<T>::ParamRef(ParamPtr<T> base) : base_(std::move(base)) {
  if (!base_) throw ContractError("ParamRef over a null parameter");
  shape_ = base_->value.shape();
}

template <typename T>
ParamRef<T>::ParamRef(ParamPtr<T> base, Shape shape, std::shared_ptr<const Indices> gather)
    : base_(std::move(base)), shape_(std::move(shape)), gather_(std::move(gather)) {
  if (!base_) throw ContractError("ParamRef over a null parameter");
  if (gather_ && static_cast<std::int64_t>(gather_->size()) != shape_.numel()) {
    throw DimensionError("parameter view of " + base_->name + ": index map size " +
                         std::to_string(gather_->size()) + " vs shape " + shape_.str());
  }
  if (!gather_ && shape_ != base_->value.shape()) {
    throw DimensionError("parameter view of " + base_->name + " without index map must keep shape");
  }
}

template <typename T>
const BasicTensor<T>& ParamRef<T>::values(BasicTensor<T>& scratch) const {
  if (!gather_) return base_->value;
  scratch = copy_values();
  return scratch;
}

template <typename T>
BasicTensor<T> ParamRef<T>::copy_values() const {
  if (!gather_) return base_->value;
  BasicTensor<T> out(shape_);
  const auto& src = base_->value;
  const auto& idx = *gather_;
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = src[static_cast<std::size_t>(idx[i])];
  return out;
}

template <typename T>
void ParamRef<T>::scatter_add(const BasicTensor<T>& view_grad, BasicTensor<T>& base_grad) const {
  if (view_grad.shape() != shape_) {
    throw DimensionError("gradient for " + name() + " has shape " + view_grad.shape().str() +
                         ", expected " + shape_.str());
  }
  if (!gather_) {
    for (std::size_t i = 0; i < view_grad.numel(); ++i) base_grad[i] += view_grad[i];
    return;
  }
  const auto& idx = *gather_;
  for (std::size_t i = 0; i < idx.size(); ++i) {
    base_grad[static_cast<std::size_t>(idx[i])] += view_grad[i];
  }
}

// ---- TapeNode ---------------------------------------------------------------

template <typename T>
std::size_t TapeNode<T>::saved_bytes() const {
  std::size_t total = 0;
  for (const auto& s : saved) total += s.storage.bytes;
  return total;
}

template <typename T>
std::size_t TapeNode<T>::saved_bytes(StorageKind kind) const {
  std::size_t total = 0;
  for (const auto& s : saved) {
    if (s.storage.kind == kind) total += s.storage.bytes;
  }
  return total;
}

template <typename T>
const BasicTensor<T>* TapeNode<T>::saved_tensor(std::size_t i) const {
  if (i >= saved.size()) return nullptr;
  return std::get_if<BasicTensor<T>>(&saved[i].data);
}

template <typename T>
const BitMask* TapeNode<T>::saved_mask(std::size_t i) const {
  if (i >= saved.size()) return nullptr;
  return std::get_if<BitMask>(&saved[i].data);
}

// ---- GradientSet ------------------------------------------------------------

template <typename T>
const BasicTensor<T>& GradientSet<T>::at(const std::string& name) const {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ContractError("no gradient for parameter " + name);
  return it->second;
}

template <typename T>
BasicTensor<T>& GradientSet<T>::at(const std::string& name) {
  auto it = grads_.find(name);
  if (it == grads_.end()) throw ContractError("no gradient for parameter " + name);
  return it->second;
}

template <typename T>
void GradientSet<T>::ensure(const ParamRef<T>& ref) {
  auto it = grads_.find(ref.name());
  if (it == grads_.end()) {
    grads_.emplace(ref.name(), BasicTensor<T>(ref.base().value.shape()));
  } else if (it->second.shape() != ref.base().value.shape()) {
    throw ContractError("two parameters named " + ref.name() + " with different shapes");
  }
}

template <typename T>
void GradientSet<T>::accumulate(const ParamRef<T>& ref, const BasicTensor<T>& grad) {
  ensure(ref);
  ref.scatter_add(grad, grads_.at(ref.name()));
}

// ---- Tape -------------------------------------------------------------------

namespace {

std::atomic<std::uint64_t> g_next_tape_uid{1};

template <typename T>
std::atomic<std::size_t>& global_live_bytes() {
  static std::atomic<std::size_t> bytes{0};
  return bytes;
}

template <typename T>
std::atomic<std::size_t>& global_peak_bytes() {
  static std::atomic<std::size_t> bytes{0};
  return bytes;
}

template <typename T>
void add_global_bytes(std::size_t n) {
  const std::size_t now = global_live_bytes<T>() += n;
  std::size_t prev = global_peak_bytes<T>().load();
  while (now > prev && !global_peak_bytes<T>().compare_exchange_weak(prev, now)) {
  }
}

}  // namespace

template <typename T>
std::size_t live_saved_bytes_all_tapes() {
  return global_live_bytes<T>().load();
}

template <typename T>
std::size_t peak_saved_bytes_all_tapes() {
  return global_peak_bytes<T>().load();
}

template <typename T>
void reset_peak_saved_bytes_all_tapes() {
  global_peak_bytes<T>() = global_live_bytes<T>().load();
}

template <typename T>
Tape<T>::Tape(SaveMode mode) : mode_(mode), uid_(g_next_tape_uid.fetch_add(1)) {}

template <typename T>
Tape<T>::Tape(Tape&& other) noexcept
    : mode_(other.mode_),
      uid_(other.uid_),
      nodes_(std::move(other.nodes_)),
      next_value_(other.next_value_),
      live_bytes_(other.live_bytes_),
      peak_bytes_(other.peak_bytes_),
      consumed_(other.consumed_) {
  other.live_bytes_ = 0;
  other.nodes_.clear();
}

template <typename T>
Tape<T>& Tape<T>::operator=(Tape&& other) noexcept {
  if (this != &other) {
    global_live_bytes<T>() -= live_bytes_;
    mode_ = other.mode_;
    uid_ = other.uid_;
    nodes_ = std::move(other.nodes_);
    next_value_ = other.next_value_;
    live_bytes_ = other.live_bytes_;
    peak_bytes_ = other.peak_bytes_;
    consumed_ = other.consumed_;
    other.live_bytes_ = 0;
    other.nodes_.clear();
  }
  return *this;
}

template <typename T>
Tape<T>::~Tape() {
  global_live_bytes<T>() -= live_bytes_;
}

template <typename T>
Var<T> Tape<T>::record(TapeNode<T> node, BasicTensor<T> output_value) {
  if (consumed_) throw StructuralError("recording on a consumed tape");
  for (ValueId id : node.inputs) {
    if (id != kNoValue && (id < 0 || id >= next_value_)) {
      throw StructuralError("op input refers to value " + std::to_string(id) +
                            " not produced earlier on this tape");
    }
  }
  bool requires_grad = (node.mask.weight_trainable && node.weight.valid()) ||
                       (node.mask.bias_trainable && node.bias.valid());
  for (bool r : node.input_requires_grad) requires_grad = requires_grad || r;

  node.op_id = static_cast<std::int64_t>(nodes_.size());
  node.output = next_value_++;
  node.output_shape = output_value.shape();
  live_bytes_ += node.saved_bytes();
  add_global_bytes<T>(node.saved_bytes());
  if (live_bytes_ > peak_bytes_) peak_bytes_ = live_bytes_;
  Var<T> out{std::move(output_value), node.output, requires_grad, uid_};
  nodes_.push_back(std::move(node));
  return out;
}

namespace {

template <typename T>
class NodeSink final : public BackwardSink<T> {
 public:
  NodeSink(const TapeNode<T>& node, std::vector<std::optional<BasicTensor<T>>>& value_grads,
           GradientSet<T>& grads)
      : node_(node), value_grads_(value_grads), grads_(grads) {}

  bool wants_input(std::size_t i) const override {
    return i < node_.inputs.size() && node_.inputs[i] != kNoValue && node_.input_requires_grad[i];
  }

  void input(std::size_t i, BasicTensor<T> grad) override {
    if (!wants_input(i)) return;
    auto& slot = value_grads_[static_cast<std::size_t>(node_.inputs[i])];
    if (!slot) {
      slot = std::move(grad);
    } else {
      require_same_shape(*slot, grad, "input gradient");
      auto& acc = *slot;
      for (std::size_t k = 0; k < acc.numel(); ++k) acc[k] += grad[k];
    }
  }

  void weight(const BasicTensor<T>& grad) override {
    if (node_.mask.weight_trainable && node_.weight.valid()) grads_.accumulate(node_.weight, grad);
  }

  void bias(const BasicTensor<T>& grad) override {
    if (node_.mask.bias_trainable && node_.bias.valid()) grads_.accumulate(node_.bias, grad);
  }

 private:
  const TapeNode<T>& node_;
  std::vector<std::optional<BasicTensor<T>>>& value_grads_;
  GradientSet<T>& grads_;
};

}  // namespace

template <typename T>
GradientSet<T> backward_pass(Tape<T>& tape, const Var<T>& output,
                             const BasicTensor<T>& loss_grad) {
  if (tape.consumed_) throw StructuralError("tape already consumed by a backward pass");
  if (tape.nodes_.empty()) throw StructuralError("backward_pass on an empty tape");
  if (output.tape_uid != tape.uid_ || output.id == kNoValue || output.id >= tape.next_value_) {
    throw StructuralError("backward_pass output was not recorded on this tape");
  }
  require_same_shape(output.value, loss_grad, "loss gradient");

  GradientSet<T> grads;
  for (const auto& node : tape.nodes_) {
    if (node.mask.weight_trainable && node.weight.valid()) grads.ensure(node.weight);
    if (node.mask.bias_trainable && node.bias.valid()) grads.ensure(node.bias);
  }

  std::vector<std::optional<BasicTensor<T>>> value_grads(static_cast<std::size_t>(tape.next_value_));
  value_grads[static_cast<std::size_t>(output.id)] = loss_grad;

  for (auto it = tape.nodes_.rbegin(); it != tape.nodes_.rend(); ++it) {
    TapeNode<T>& node = *it;
    for (ValueId in : node.inputs) {
      if (in != kNoValue && in >= node.output) {
        throw StructuralError("tape node " + std::to_string(node.op_id) + " (" + node.label +
                              ") consumes value " + std::to_string(in) +
                              " produced after it: cycle");
      }
    }
    auto& slot = value_grads[static_cast<std::size_t>(node.output)];
    if (slot) {
      NodeSink<T> sink(node, value_grads, grads);
      node.backward(node, *slot, sink);
      slot.reset();
    }
    tape.live_bytes_ -= node.saved_bytes();
    global_live_bytes<T>() -= node.saved_bytes();
    for (auto& s : node.saved) {
      s.data = std::monostate{};
      s.storage.bytes = 0;
    }
  }
  tape.consumed_ = true;
  return grads;
}

template class ParamRef<float>;
template class ParamRef<double>;
template struct TapeNode<float>;
template struct TapeNode<double>;
template class GradientSet<float>;
template class GradientSet<double>;
template class Tape<float>;
template class Tape<double>;
template std::size_t live_saved_bytes_all_tapes<float>();
template std::size_t live_saved_bytes_all_tapes<double>();
template std::size_t peak_saved_bytes_all_tapes<float>();
template std::size_t peak_saved_bytes_all_tapes<double>();
template void reset_peak_saved_bytes_all_tapes<float>();
template void reset_peak_saved_bytes_all_tapes<double>();
template GradientSet<float> backward_pass(Tape<float>&, const Var<float>&, const Tensor&);
template GradientSet<double> backward_pass(Tape<double>&, const Var<double>&, const Tensor64&);

}  // namespace tinytl
