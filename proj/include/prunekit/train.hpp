#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/network.hpp"

namespace prunekit {

struct TrainOptions {
    int epochs = 1;
    std::vector<std::pair<int, float>> lr_schedule = {{0, 1e-3f}}; // (first epoch, lr)
    int batch = 32;
    std::uint32_t seed = 1;
    float momentum = 0.9f;
    float weight_decay = 5e-4f;
    // conv filters pinned at zero (weights, bias and velocity) for fixture nets
    std::map<std::string, std::vector<int>> frozen_filters;
};

struct EpochLog {
    int epoch = 0;
    float lr = 0.0f;
    double loss = 0.0;
    double accuracy = 0.0;
    int skipped_steps = 0;
};

float lr_at(const std::vector<std::pair<int, float>>& schedule, int epoch);

// seeded shuffling, minibatch SGD with momentum and weight decay; aborts on a
// non-finite loss, skips (and counts) steps with non-finite gradients
std::vector<EpochLog> train_epochs(Network& net, const Dataset& ds, const TrainOptions& opt);

struct EvalResult {
    double top1 = 0.0;
    double top5 = 0.0;
    bool has_top5 = false;
    int count = 0;
};

EvalResult evaluate(Network& net, const Dataset& ds, int batch = 64);

// frozen-filter helper shared by fixtures: zeroes the named filters in place
void zero_filters(Network& net, const std::map<std::string, std::vector<int>>& frozen);

} // namespace prunekit
