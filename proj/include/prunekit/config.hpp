#pragma once

#include <cstdint>
#include <string>

namespace prunekit {

// everything the cli can read from a key=value config file; flags override
struct RunConfig {
    std::string arch = "smallnet";
    int classes = 5;
    int train_per_class = 100;
    int eval_per_class = 30;
    std::uint32_t data_seed = 7;
    std::uint32_t seed = 1;
    int batch = 32;
    int epochs = 2;
    float lr = 1e-3f;
    float momentum = 0.9f;
    float weight_decay = 5e-4f;
    std::string criterion = "entropy";
    double keep_ratio = 0.5;
    int bins = 100;
    std::string strategy = "staged";
    int quick_epochs = 1;
    bool adaptive_quick = true;
    double quick_extra_drop = 5.0;
    float quick_lr = 1e-3f;
    int careful_epochs = 6;
    int stats_per_class = 10;
};

// one "key = value" per line, '#' comments; unknown keys are an error
void apply_config_kv(RunConfig& cfg, const std::string& key, const std::string& value);
RunConfig load_config(const std::string& path, RunConfig base = {});
std::string config_text(const RunConfig& cfg);

} // namespace prunekit
