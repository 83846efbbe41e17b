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

#include "tinytl/memory_model.hpp"

#include "tinytl/errors.hpp"

namespace tinytl {
namespace {

class Tracer {
 public:
  Tracer(const FineTunePolicy& policy, const NormSpec& norm) : policy_(policy), norm_(norm) {}

  struct Value {
    Shape shape;
    bool rg = false;
  };

  Value unit(const Value& in, const ConvSpec& spec, bool lite, bool relu, const std::string& name) {
    const bool w_tr = policy_.trains(lite ? ParamGroup::kLite : ParamGroup::kWeight);
    const bool n_tr = policy_.trains(lite ? ParamGroup::kLite : ParamGroup::kNorm);
    const bool b_tr = policy_.trains(lite ? ParamGroup::kLite : ParamGroup::kBias);
    const std::int64_t ho = spec.out_size(static_cast<int>(in.shape[1]));
    const std::int64_t wo = spec.out_size(static_cast<int>(in.shape[2]));
    const Shape out{spec.out_ch, ho, wo};
    const std::int64_t wn = spec.weight_shape().numel();

    LayerDesc conv{name + ".conv", OpKind::kConv2d, in.shape, out, w_tr, in.rg};
    conv.forward_mac = out.numel() * spec.kernel * spec.kernel * (spec.in_ch / spec.groups);
    (w_tr ? conv.trainable_params : conv.frozen_params) = wn;
    layers.push_back(conv);
    Value v{out, in.rg || w_tr};

    norm_.groups(spec.out_ch);
    LayerDesc gn{name + ".gn", OpKind::kGroupNorm, out, out, n_tr, v.rg};
    (n_tr ? gn.trainable_params : gn.frozen_params) = 2LL * spec.out_ch;
    layers.push_back(gn);
    v.rg = v.rg || n_tr;

    LayerDesc bias{name + ".bias", OpKind::kBiasAdd, out, out, false, v.rg};
    (b_tr ? bias.trainable_params : bias.frozen_params) = spec.out_ch;
    layers.push_back(bias);
    v.rg = v.rg || b_tr;

    if (relu) layers.push_back(LayerDesc{name + ".relu", OpKind::kReLU, out, out, false, v.rg});
    return v;
  }

  Value add(const Value& a, const Value& b, const std::string& name) {
    if (!(a.shape == b.shape)) throw SpecError(name + ": shape mismatch in trace");
    layers.push_back(LayerDesc{name, OpKind::kAdd, a.shape, a.shape, false, a.rg || b.rg});
    return Value{a.shape, a.rg || b.rg};
  }

  Value pool(const Value& a, const std::string& name) {
    const Shape out{a.shape[0], (a.shape[1] + 1) / 2, (a.shape[2] + 1) / 2};
    layers.push_back(LayerDesc{name, OpKind::kAvgPool2, a.shape, out, false, a.rg});
    return Value{out, a.rg};
  }

  Value upsample(const Value& a, std::int64_t h, std::int64_t w, const std::string& name) {
    const Shape out{a.shape[0], h, w};
    LayerDesc d{name, OpKind::kUpsample, a.shape, out, false, a.rg};
    d.forward_mac = 4 * out.numel();
    layers.push_back(d);
    return Value{out, a.rg};
  }

  void head(const Value& a, int n_classes) {
    const std::int64_t c = a.shape[0];
    layers.push_back(
        LayerDesc{"head.pool", OpKind::kGlobalAvgPool, a.shape, Shape{c}, false, a.rg});
    const bool tr = policy_.trains(ParamGroup::kHead);
    LayerDesc lin{"head", OpKind::kLinear, Shape{c}, Shape{n_classes}, tr, a.rg};
    lin.forward_mac = c * n_classes;
    (tr ? lin.trainable_params : lin.frozen_params) = c * n_classes + n_classes;
    layers.push_back(lin);
  }

  std::vector<LayerDesc> layers;

 private:
  const FineTunePolicy& policy_;
  const NormSpec& norm_;
};

ConvSpec spec_of(int in, int out, int k, int stride, int groups) {
  ConvSpec s;
  s.in_ch = in;
  s.out_ch = out;
  s.kernel = k;
  s.stride = stride;
  s.groups = groups;
  s.standardize_weight = true;
  return s;
}

}  // namespace

std::uint64_t layer_activation_bytes(const LayerDesc& layer, int batch) {
  if (batch < 1) throw SpecError("layer_activation_bytes: batch must be >= 1");
  const std::uint64_t n = static_cast<std::uint64_t>(batch) *
                          static_cast<std::uint64_t>(layer.input.numel());
  switch (layer.kind) {
    case OpKind::kLinear:
    case OpKind::kConv2d:
    case OpKind::kFrozenBatchNorm:
      return layer.weight_trainable ? 4 * n : 0;
    case OpKind::kGroupNorm:
      return layer.weight_trainable || layer.input_requires_grad ? 4 * n : 0;
    case OpKind::kReLU:
      return (n + 7) / 8;
    case OpKind::kSigmoid:
    case OpKind::kHSwish:
      return 4 * n;
    case OpKind::kBiasAdd:
    case OpKind::kAvgPool2:
    case OpKind::kUpsample:
    case OpKind::kGlobalAvgPool:
    case OpKind::kAdd:
      return 0;
  }
  throw SpecError("layer_activation_bytes: unknown layer kind");
}

std::vector<LayerDesc> trace_layers(const ArchitectureSpec& arch, const FineTunePolicy& policy,
                                    int resolution, bool lite) {
  if (resolution < 1) throw SpecError("trace_layers: resolution must be positive");
  Tracer t(policy, arch.norm);
  using V = Tracer::Value;
  V h{Shape{arch.stem.in_ch, resolution, resolution}, false};
  h = t.unit(h, spec_of(arch.stem.in_ch, arch.stem.out_ch, arch.stem.kernel, arch.stem.stride, 1),
             false, true, "stem");
  for (std::size_t s = 0; s < arch.stages.size(); ++s) {
    for (std::size_t b = 0; b < arch.stages[s].blocks.size(); ++b) {
      const MBBlockSpec& blk = arch.stages[s].blocks[b];
      const std::string p = "s" + std::to_string(s) + ".b" + std::to_string(b);
      const int e = blk.expanded();
      V m = t.unit(h, spec_of(blk.in_ch, e, 1, 1, 1), false, true, p + ".expand");
      m = t.unit(m, spec_of(e, e, blk.kernel, blk.stride, e), false, true, p + ".dw");
      m = t.unit(m, spec_of(e, blk.out_ch, 1, 1, 1), false, false, p + ".project");
      if (blk.has_skip()) m = t.add(m, h, p + ".skip");
      if (lite) {
        V l = t.pool(h, p + ".lite.pool");
        l = t.unit(l, spec_of(blk.in_ch, blk.out_ch, blk.lite.kernel, 1, blk.lite.groups), true,
                   true, p + ".lite");
        l = t.upsample(l, m.shape[1], m.shape[2], p + ".lite.upsample");
        m = t.add(m, l, p + ".lite_add");
      }
      h = m;
    }
  }
  t.head(h, arch.n_classes);
  return std::move(t.layers);
}

MemoryReport model_footprint(const ArchitectureSpec& arch, const FineTunePolicy& policy,
                             int batch, int resolution, bool lite) {
  MemoryReport r;
  r.policy = policy.name();
  r.batch = batch;
  r.resolution = resolution;
  for (const LayerDesc& d : trace_layers(arch, policy, resolution, lite)) {
    MemoryRow row;
    row.layer = d.name;
    row.kind = to_string(d.kind);
    row.saved_activation_bytes = layer_activation_bytes(d, batch);
    row.frozen_param_bytes = static_cast<std::uint64_t>(d.frozen_params);
    row.trainable_param_bytes = 4 * static_cast<std::uint64_t>(d.trainable_params);
    row.optimizer_state_bytes = 2 * row.trainable_param_bytes;
    r.activation_bytes += row.saved_activation_bytes;
    r.frozen_param_bytes += row.frozen_param_bytes;
    r.trainable_param_bytes += row.trainable_param_bytes;
    r.optimizer_state_bytes += row.optimizer_state_bytes;
    r.rows.push_back(std::move(row));
  }
  return r;
}

std::uint64_t mac_count(const ArchitectureSpec& arch, MacMode mode, const FineTunePolicy& policy,
                        int batch, int resolution, bool lite) {
  std::uint64_t total = 0;
  for (const LayerDesc& d : trace_layers(arch, policy, resolution, lite)) {
    const auto f = static_cast<std::uint64_t>(d.forward_mac);
    total += f;
    if (mode == MacMode::kTraining) {
      total += f;
      if (d.weight_trainable && (d.kind == OpKind::kConv2d || d.kind == OpKind::kLinear)) {
        total += f;
      }
    }
  }
  return total * static_cast<std::uint64_t>(batch);
}

CostReport cost_report(const ArchitectureSpec& arch, const FineTunePolicy& policy, int batch,
                       int resolution) {
  CostReport c;
  c.inference_mac = mac_count(arch, MacMode::kInference, policy, batch, resolution);
  c.training_mac = mac_count(arch, MacMode::kTraining, policy, batch, resolution);
  c.memory = model_footprint(arch, policy, batch, resolution);
  return c;
}

double lite_overhead_ratio(const MBBlockSpec& block, int h, int w, RatioPart part) {
  if (h < 1 || w < 1) throw SpecError("lite_overhead_ratio: dims must be positive");
  const ConvSpec dw = spec_of(block.expanded(), block.expanded(), block.kernel, block.stride,
                              block.expanded());
  const double hw = static_cast<double>(h) * w;
  const double howo = static_cast<double>(dw.out_size(h)) * dw.out_size(w);
  const double hpwp = static_cast<double>((h + 1) / 2) * ((w + 1) / 2);
  const double bottleneck = block.in_ch * hw + block.expanded() * hw + block.expanded() * howo;
  const double lite_units = block.in_ch + block.out_ch;
  switch (part) {
    case RatioPart::kFull: return bottleneck / (lite_units * hpwp);
    case RatioPart::kChannelOnly: return bottleneck / (lite_units * hw);
    case RatioPart::kDownsampleOnly: return hw / hpwp;
  }
  return 0.0;
}

}  // namespace tinytl
