#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "prunekit/pruner.hpp"
#include "prunekit/train.hpp"

namespace prunekit {

// staged: prune layer by layer with a quick tune after each cut and one
//         careful tune at the end
// one_shot: score everything on the unpruned net, cut all layers at once,
//           then spend the whole epoch budget on a single tune
// per_layer: full careful tune after every layer
enum class Strategy { Staged, OneShot, PerLayer };

std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& s);

struct ScheduleConfig {
    std::vector<std::string> targets; // empty = every prunable conv, in order
    std::string criterion = "entropy";
    double keep_ratio = 0.5;
    EntropyConfig entropy;
    Strategy strategy = Strategy::Staged;
    int quick_epochs = 1;
    bool adaptive_quick = true;      // one extra quick epoch after a bad drop
    double quick_extra_drop = 5.0;   // accuracy points that count as bad
    float quick_lr = 1e-3f;
    int careful_epochs = 6;
    std::vector<std::pair<int, float>> careful_lr = {{0, 1e-3f}, {2, 1e-4f}, {4, 1e-5f}};
    int stats_per_class = 10; // scoring subset size, capped by availability
    int batch = 32;
    std::uint32_t seed = 1;
    float momentum = 0.9f;
    float weight_decay = 5e-4f;
};

struct StageRecord {
    std::string action; // baseline | prune | quick_tune | quick_tune_extra | careful_tune
    std::string layer;  // pruned layer, or "all" for the one-shot cut
    int epochs = 0;
    double loss = 0.0;     // mean train loss of the stage's last epoch
    double accuracy = 0.0; // eval top-1 after the stage, percent
    std::int64_t flops = 0;
    std::int64_t params = 0;
};

struct RunLog {
    Strategy strategy = Strategy::Staged;
    std::string criterion;
    double keep_ratio = 0.0;
    std::vector<StageRecord> stages;
    PruningPlan plan;
    int declared_budget = 0; // tuning epochs the strategy is entitled to
    int epochs_used = 0;     // can exceed the budget only via adaptive extras
    double baseline_accuracy = 0.0, final_accuracy = 0.0;
    std::int64_t baseline_flops = 0, final_flops = 0;
    std::int64_t baseline_params = 0, final_params = 0;
};

int declared_epoch_budget(const ScheduleConfig& cfg, int n_targets);

RunLog run_schedule(Network& net, const Dataset& train_set, const Dataset& eval_set,
                    const ScheduleConfig& cfg);

std::string run_log_csv(const RunLog& log);
std::string render_run_log(const RunLog& log);

struct CriterionOutcome {
    std::string criterion;
    RunLog log;
};

// same schedule on an identical fresh copy of the net per criterion
std::vector<CriterionOutcome> compare_criteria(const Network& base, const Dataset& train_set,
                                               const Dataset& eval_set,
                                               const ScheduleConfig& cfg,
                                               const std::vector<std::string>& criteria);

} // namespace prunekit
