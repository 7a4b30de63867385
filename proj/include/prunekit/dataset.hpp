#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "prunekit/tensor.hpp"

namespace prunekit {

struct Dataset {
    Tensor images; // (count, c, h, w), values in [0,1]
    std::vector<int> labels;
    int classes = 0;

    int count() const { return static_cast<int>(labels.size()); }
};

// class-conditional templates (per-channel brightness ladder plus a class-keyed
// square patch) with uniform pixel noise; sample order is class-major
Dataset synth_dataset(int classes, int per_class, int c, int h, int w, std::uint32_t seed,
                      float noise = 0.08f);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

// seeded per-class sample without replacement, class-major order
Dataset stratified_sample(const Dataset& ds, int per_class, std::uint32_t seed);

Dataset take_subset(const Dataset& ds, const std::vector<int>& indices);

} // namespace prunekit
