#pragma once

#include <string>
#include <vector>

#include "prunekit/criteria.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/network.hpp"

namespace prunekit {

struct PruneTarget {
    std::string layer;
    std::vector<int> keep; // kept output channels, ascending
};

struct PruningPlan {
    std::vector<PruneTarget> targets; // applied in order
};

// conv layers that can legally lose output channels, in network order:
// top-level convs with a conv/fc consumer downstream, plus the middle conv
// of every residual block
std::vector<std::string> prunable_layers(const NetworkSpec& spec);

// drop every output channel of `layer` not listed in keep, shrinking any
// batchnorm on the way and the consumer's input side to match
void prune_conv_layer(Network& net, const std::string& layer,
                      const std::vector<int>& keep);

// swap a trailing fc stack for global average pooling plus one fresh fc of
// the same class count, named like the old last fc
void replace_fc_head_with_gap(Network& net, unsigned seed);

ChannelScores score_layer(Network& net, const Dataset& eval_set,
                          const std::string& criterion, const std::string& layer,
                          const EntropyConfig& cfg = {}, int batch = 32);

// scores each layer on the net as it stands, prunes it, then moves on;
// returns the keep sets it used
PruningPlan build_and_apply_plan(Network& net, const Dataset& eval_set,
                                 const std::string& criterion, double keep_ratio,
                                 const std::vector<std::string>& layers,
                                 const EntropyConfig& cfg = {}, int batch = 32);

void apply_plan(Network& net, const PruningPlan& plan);

std::string plan_text(const PruningPlan& plan);
PruningPlan parse_plan(const std::string& text);

} // namespace prunekit
