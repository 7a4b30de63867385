#pragma once

#include <string>
#include <vector>

#include "prunekit/dataset.hpp"
#include "prunekit/network.hpp"

namespace prunekit {

// per-image channel summaries sampled at a conv layer's activation tap:
// m is rows x channels, one row per eval image, each entry the spatial mean
// of that channel
struct ChannelStats {
    std::string layer; // conv layer the stats describe
    std::string tap;   // unit actually sampled (relu/batchnorm/conv output)
    int rows = 0;
    int channels = 0;
    std::vector<float> m;

    float& at(int r, int c) { return m[static_cast<size_t>(r) * channels + c]; }
    float at(int r, int c) const { return m[static_cast<size_t>(r) * channels + c]; }
};

struct EntropyConfig {
    int bins = 100;
};

struct ChannelScores {
    std::string layer;
    std::string criterion; // "entropy", "apoz", "weight_sum", "taylor"
    std::vector<double> scores;
};

// where a conv layer's per-channel statistics are read: walk forward from the
// conv through a batchnorm if present, then onto a relu if one follows; the
// last unit reached is the tap
std::string activation_tap(const NetworkSpec& spec, const std::string& conv_layer);

ChannelStats collect_stats(Network& net, const Dataset& eval_set,
                           const std::string& conv_layer, int batch = 32);

// histogram entropy of each channel's column of m; lower = less informative
ChannelScores entropy_score(const ChannelStats& stats, const EntropyConfig& cfg = {});

// 1 - average fraction of exactly-zero activations; requires a relu tap
ChannelScores apoz_score(Network& net, const Dataset& eval_set,
                         const std::string& conv_layer, int batch = 32);

// l1 norm of each output filter, bias excluded
ChannelScores weight_sum_score(const Network& net, const std::string& conv_layer);

// mean over images of |spatial mean of activation * gradient| at the tap,
// gradients from per-sample cross entropy against the true labels
ChannelScores taylor_score(Network& net, const Dataset& eval_set,
                           const std::string& conv_layer, int batch = 32);

// indices of the top keep_ratio fraction of channels (at least one), sorted
// ascending; ties broken toward the smaller channel index
std::vector<int> rank_channels(const ChannelScores& scores, double keep_ratio);

void write_stats_csv(const ChannelStats& stats, const std::string& path);
ChannelStats read_stats_csv(const std::string& path);
std::string scores_csv(const ChannelScores& scores);

} // namespace prunekit
