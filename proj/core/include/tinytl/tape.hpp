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

#ifndef TINYTL_TAPE_HPP_
#define TINYTL_TAPE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tinytl/tensor.hpp"

namespace tinytl {

// How a saved-for-backward buffer is stored. Bytes always describe the
// 32-bit deployment format, also when the tape runs in 64-bit shadow mode.
enum class StorageKind { kFull32, kBitMask, kNone };

struct StorageClass {
  StorageKind kind = StorageKind::kNone;
  std::size_t bytes = 0;

  static StorageClass full32(std::size_t numel) { return {StorageKind::kFull32, 4 * numel}; }
  static StorageClass bitmask(std::size_t numel) { return {StorageKind::kBitMask, (numel + 7) / 8}; }
  static StorageClass none() { return {}; }
};

const char* to_string(StorageKind kind);

// Trainability of the weight-like and bias-like parameter of one recorded op.
struct TrainMask {
  bool weight_trainable = false;
  bool bias_trainable = false;
};

// Parameter groups a fine-tuning policy switches on or off.
enum class ParamGroup {
  kWeight,  // conv weights of the feature extractor
  kBias,    // additive biases of the feature extractor
  kNorm,    // affine scale/shift of feature-extractor norm layers
  kLite,    // every parameter of a lite residual branch
  kHead,    // classifier head
};

const char* to_string(ParamGroup group);

template <typename T>
struct Parameter {
  std::string name;
  ParamGroup group = ParamGroup::kWeight;
  BasicTensor<T> value;
  bool trainable = false;
};

template <typename T>
using ParamPtr = std::shared_ptr<Parameter<T>>;

template <typename T>
ParamPtr<T> make_parameter(std::string name, ParamGroup group, BasicTensor<T> value,
                           bool trainable = false) {
  return std::make_shared<Parameter<T>>(
      Parameter<T>{std::move(name), group, std::move(value), trainable});
}

// A whole parameter or an index-mapped slice of one. Slices share storage
// with their base: writes to the base are visible through every view.
template <typename T>
class ParamRef {
 public:
  using Indices = std::vector<std::int64_t>;

  ParamRef() = default;
  explicit ParamRef(ParamPtr<T> base);
  ParamRef(ParamPtr<T> base, Shape shape, std::shared_ptr<const Indices> gather);

  bool valid() const { return base_ != nullptr; }
  explicit operator bool() const { return valid(); }

  const Parameter<T>& base() const { return *base_; }
  const ParamPtr<T>& base_ptr() const { return base_; }
  const std::string& name() const { return base_->name; }
  bool trainable() const { return base_ && base_->trainable; }
  const Shape& shape() const { return shape_; }
  bool is_view() const { return gather_ != nullptr; }
  const Indices* gather() const { return gather_.get(); }

  // The values in view layout. Returns the base tensor directly when the
  // view is the whole parameter, otherwise gathers into `scratch`.
  const BasicTensor<T>& values(BasicTensor<T>& scratch) const;
  BasicTensor<T> copy_values() const;

  // Adds a view-shaped gradient into a base-shaped accumulator.
  void scatter_add(const BasicTensor<T>& view_grad, BasicTensor<T>& base_grad) const;

 private:
  ParamPtr<T> base_;
  Shape shape_;
  std::shared_ptr<const Indices> gather_;
};

using ValueId = std::int64_t;
inline constexpr ValueId kNoValue = -1;

// A value flowing through the forward pass. `id` is kNoValue for constants
// and for values produced outside a tape (inference mode).
template <typename T>
struct Var {
  BasicTensor<T> value;
  ValueId id = kNoValue;
  bool requires_grad = false;
  std::uint64_t tape_uid = 0;

  static Var constant(BasicTensor<T> t) { return Var{std::move(t), kNoValue, false, 0}; }
  const Shape& shape() const { return value.shape(); }
};

enum class OpKind {
  kLinear,
  kConv2d,
  kGroupNorm,
  kFrozenBatchNorm,
  kBiasAdd,
  kReLU,
  kSigmoid,
  kHSwish,
  kAvgPool2,
  kUpsample,
  kGlobalAvgPool,
  kAdd,
};

const char* to_string(OpKind kind);

template <typename T>
struct SavedBuffer {
  std::variant<std::monostate, BasicTensor<T>, BitMask> data;
  StorageClass storage;
};

template <typename T>
class BackwardSink;

template <typename T>
struct TapeNode {
  using BackwardFn =
      std::function<void(const TapeNode&, const BasicTensor<T>& grad_out, BackwardSink<T>&)>;

  std::int64_t op_id = -1;
  OpKind kind = OpKind::kAdd;
  std::string label;
  std::vector<ValueId> inputs;
  std::vector<bool> input_requires_grad;
  ValueId output = kNoValue;
  Shape output_shape;
  ParamRef<T> weight;  // W, conv kernel, norm scale
  ParamRef<T> bias;    // b, norm shift
  TrainMask mask;
  std::vector<SavedBuffer<T>> saved;
  BackwardFn backward;

  std::size_t saved_bytes() const;
  std::size_t saved_bytes(StorageKind kind) const;

  const BasicTensor<T>* saved_tensor(std::size_t i) const;
  const BitMask* saved_mask(std::size_t i) const;
};

// Receives the gradients one node produces during backward.
template <typename T>
class BackwardSink {
 public:
  virtual ~BackwardSink() = default;
  virtual bool wants_input(std::size_t i) const = 0;
  virtual void input(std::size_t i, BasicTensor<T> grad) = 0;
  virtual void weight(const BasicTensor<T>& grad) = 0;
  virtual void bias(const BasicTensor<T>& grad) = 0;
};

// Gradients keyed by base-parameter name, present for trainable parameters
// only. Slice gradients are scattered into the base layout.
template <typename T>
class GradientSet {
 public:
  using Map = std::map<std::string, BasicTensor<T>>;

  bool contains(const std::string& name) const { return grads_.count(name) != 0; }
  const BasicTensor<T>& at(const std::string& name) const;
  BasicTensor<T>& at(const std::string& name);
  std::size_t size() const { return grads_.size(); }
  bool empty() const { return grads_.empty(); }

  void ensure(const ParamRef<T>& ref);
  void accumulate(const ParamRef<T>& ref, const BasicTensor<T>& grad);

  typename Map::const_iterator begin() const { return grads_.begin(); }
  typename Map::const_iterator end() const { return grads_.end(); }

 private:
  Map grads_;
};

// kSelective saves only what each op's backward needs given the trainable
// set. kAll saves every op's full input; it is the reference the selective
// tape is checked against.
enum class SaveMode { kSelective, kAll };

template <typename T>
class Tape;

template <typename T>
GradientSet<T> backward_pass(Tape<T>& tape, const Var<T>& output,
                             const BasicTensor<T>& loss_grad);

// Single-threaded record of forward ops. A tape is consumed by one
// backward_pass; saved buffers are released as each node is processed.
template <typename T>
class Tape {
 public:
  explicit Tape(SaveMode mode = SaveMode::kSelective);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&& other) noexcept;
  Tape& operator=(Tape&& other) noexcept;
  ~Tape();

  SaveMode mode() const { return mode_; }
  bool save_all() const { return mode_ == SaveMode::kAll; }
  std::uint64_t uid() const { return uid_; }

  // Appends `node`, assigning op and output ids. Input ids must come from
  // this tape (or be kNoValue).
  Var<T> record(TapeNode<T> node, BasicTensor<T> output_value);

  // Bytes currently held by saved buffers, and the maximum seen so far.
  std::size_t saved_bytes() const { return live_bytes_; }
  std::size_t peak_saved_bytes() const { return peak_bytes_; }

  const std::vector<TapeNode<T>>& nodes() const { return nodes_; }
  std::vector<TapeNode<T>>& mutable_nodes() { return nodes_; }
  bool empty() const { return nodes_.empty(); }
  bool consumed() const { return consumed_; }

 private:
  friend GradientSet<T> backward_pass<T>(Tape<T>&, const Var<T>&, const BasicTensor<T>&);

  SaveMode mode_;
  std::uint64_t uid_;
  std::vector<TapeNode<T>> nodes_;
  ValueId next_value_ = 0;
  std::size_t live_bytes_ = 0;
  std::size_t peak_bytes_ = 0;
  bool consumed_ = false;
};

// Saved bytes currently held by all live tapes of this precision in the
// process. Inference-only code paths leave it untouched.
template <typename T>
std::size_t live_saved_bytes_all_tapes();

// High-water mark of live_saved_bytes_all_tapes since the last reset.
template <typename T>
std::size_t peak_saved_bytes_all_tapes();
template <typename T>
void reset_peak_saved_bytes_all_tapes();

// Sum of StorageClass bytes over the nodes currently on the tape.
template <typename T>
std::size_t saved_bytes(const Tape<T>& tape) {
  return tape.saved_bytes();
}

// True when an op with these inputs/params produces a value that needs a
// gradient.
template <typename T>
bool output_requires_grad(std::span<const Var<T>* const> inputs, const TrainMask& mask,
                          const ParamRef<T>& weight, const ParamRef<T>& bias) {
  for (const Var<T>* v : inputs) {
    if (v->requires_grad) return true;
  }
  return (mask.weight_trainable && weight.valid()) || (mask.bias_trainable && bias.valid());
}

}  // namespace tinytl

#endif  // TINYTL_TAPE_HPP_
