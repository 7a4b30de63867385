#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "prunekit/ops.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

enum class LayerKind { Conv, Relu, MaxPool, Gap, Fc, BatchNorm, Softmax, Add };

std::string kind_name(LayerKind k);
LayerKind kind_from_name(const std::string& s);

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    int out_channels = 0; // conv
    int kernel = 0, stride = 1, pad = 0;
    int window = 0, pool_stride = 0; // maxpool
    int units = 0;                   // fc
    float epsilon = 1e-5f;           // batchnorm
};

// three conv stages with an identity shortcut; input and output channel
// counts are equal by construction (stage3 restores the block input width)
struct ResidualBlockSpec {
    std::string name;
    int stage1_channels = 0;
    int stage2_channels = 0; // the only stage open to pruning
    int mid_kernel = 3;
    bool batchnorm = true;
    float epsilon = 1e-5f;
};

using UnitSpec = std::variant<LayerSpec, ResidualBlockSpec>;

struct NetworkSpec {
    int input_c = 0, input_h = 0, input_w = 0;
    std::vector<UnitSpec> units;
};

void validate_spec(const NetworkSpec& spec);

// one record per executed layer, block members flattened with qualified names
// ("block1.conv2"); each block contributes a closing Add entry named after the
// block itself
struct LayoutEntry {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    std::string block; // enclosing block name, empty at top level
    int stage = 0;     // conv stage inside a block (1..3), 0 otherwise
    int in_c = 0, in_h = 0, in_w = 0;
    int out_c = 0, out_h = 0, out_w = 0;
    int kernel = 0, stride = 1, pad = 0;
    int window = 0, pool_stride = 0;
    float epsilon = 1e-5f;
};

std::vector<LayoutEntry> layout(const NetworkSpec& spec);

const LayoutEntry* find_entry(const std::vector<LayoutEntry>& lay, const std::string& name);

struct Network {
    NetworkSpec spec;
    std::map<std::string, ConvWeights> conv;
    std::map<std::string, FcWeights> fc;
    std::map<std::string, BatchNormParams> bn;
};

// uniform +/- sqrt(6/(fan_in+fan_out)) weights, zero biases, identity batchnorm
Network init_network(const NetworkSpec& spec, std::uint32_t seed);

enum class Mode { Train, Eval };

// zeroes the listed channels of the named layer's recorded output before it
// flows downstream
struct AblationMask {
    std::string layer;
    std::vector<int> channels;
};

struct ForwardResult {
    std::vector<std::string> order;
    std::map<std::string, Tensor> activations;
    std::map<std::string, BatchNormCache> bn_cache;
    Tensor logits; // input of a terminal softmax, otherwise the final output
    std::string logits_name;
};

ForwardResult forward(Network& net, const Tensor& batch, Mode mode,
                      const AblationMask* ablate = nullptr);

struct NetworkGrads {
    std::map<std::string, ConvWeights> conv;
    std::map<std::string, FcWeights> fc;
    std::map<std::string, BatchNormParams> bn; // scale/shift carry the gradients
    std::map<std::string, Tensor> act_grads;   // per-layer output grads when recorded
};

// grad_logits must match fwd.logits; mode must match the forward pass that
// produced fwd (eval-mode backward treats batchnorm moments as constants)
NetworkGrads backward(Network& net, const Tensor& batch, const ForwardResult& fwd,
                      const Tensor& grad_logits, bool record_act_grads = false,
                      Mode mode = Mode::Train);

} // namespace prunekit
