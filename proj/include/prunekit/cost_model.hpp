#pragma once

#include <cstdint>
#include <string>

#include "prunekit/network.hpp"

namespace prunekit {

// multiply-accumulate = 1 FLOP, per image; pooling/relu/gap/batchnorm cost 0
std::int64_t layer_flops(const LayoutEntry& e);
// trainable parameters, biases excluded from conv/fc counts, batchnorm = 2c
std::int64_t layer_params(const LayoutEntry& e);
// float32 output buffer for a batch; only conv/relu/maxpool/gap/fc outputs
// (plus the input image) occupy accounted buffers
std::int64_t layer_activation_bytes(const LayoutEntry& e, int batch);

struct CostRow {
    std::string name;
    LayerKind kind = LayerKind::Conv;
    bool in_original = false, in_pruned = false;
    std::int64_t flops[2] = {0, 0}; // [0] original, [1] pruned
    std::int64_t params[2] = {0, 0};
    std::int64_t act_bytes[2] = {0, 0};
};

struct CostReport {
    bool has_pruned = false;
    std::vector<CostRow> rows; // leading synthetic "input" row, aligned by name
    CostRow totals;
};

CostReport cost_report(const NetworkSpec& original, int batch = 1);
CostReport cost_report(const NetworkSpec& original, const NetworkSpec& pruned, int batch = 1);

std::string render_report_csv(const CostReport& r);
std::string render_report_text(const CostReport& r);

std::string human_count(std::int64_t v);
std::string human_bytes(std::int64_t v);

} // namespace prunekit
