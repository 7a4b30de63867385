#pragma once

#include <string>
#include <vector>

#include "prunekit/network.hpp"

namespace prunekit {

// the classic 16-layer stack: 13 convs in five pools, three fc layers
NetworkSpec vgg16_spec();

// same stack with conv1 through conv4 halved and the fc head swapped for
// global average pooling into one classifier
NetworkSpec vgg16_halved_spec();

// small plain net for experiments: two conv/pool stages and one fc
NetworkSpec smallnet_spec(int classes, int in_c = 3, int in_h = 12, int in_w = 12);

// small residual net: conv stem, three bottleneck blocks, gap head
NetworkSpec smallres_spec(int classes, int in_c = 3, int in_h = 12, int in_w = 12);

std::vector<std::string> preset_names();
NetworkSpec preset_spec(const std::string& name, int classes);

} // namespace prunekit
