#include "prunekit/schedule.hpp"

#include <algorithm>
#include <cstdio>

#include "prunekit/cost_model.hpp"

namespace prunekit {

namespace {

// stretch a schedule built for from_epochs over to_epochs, keeping the phase
// order and pinning the first change to epoch 0
std::vector<std::pair<int, float>> scale_schedule(
    const std::vector<std::pair<int, float>>& s, int from_epochs, int to_epochs) {
    if (from_epochs == to_epochs || s.empty()) return s;
    std::vector<std::pair<int, float>> out;
    int prev = -1;
    for (const auto& [e, lr] : s) {
        int e2 = static_cast<int>(static_cast<long long>(e) * to_epochs / from_epochs);
        if (e2 <= prev) e2 = prev + 1;
        if (e2 >= to_epochs && !out.empty()) break;
        out.push_back({e2, lr});
        prev = e2;
    }
    if (!out.empty()) out[0].first = 0;
    return out;
}

int min_class_count(const Dataset& ds) {
    std::vector<int> counts(static_cast<size_t>(ds.classes), 0);
    for (int lab : ds.labels) ++counts[lab];
    return *std::min_element(counts.begin(), counts.end());
}

} // namespace

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Staged: return "staged";
        case Strategy::OneShot: return "one_shot";
        case Strategy::PerLayer: return "per_layer";
    }
    fail("bad strategy value");
}

Strategy strategy_from_name(const std::string& s) {
    if (s == "staged") return Strategy::Staged;
    if (s == "one_shot") return Strategy::OneShot;
    if (s == "per_layer") return Strategy::PerLayer;
    fail("unknown strategy '" + s + "' (expected staged, one_shot or per_layer)");
}

int declared_epoch_budget(const ScheduleConfig& cfg, int n_targets) {
    check(n_targets >= 1, "budget needs at least one target");
    if (cfg.strategy == Strategy::PerLayer) return n_targets * cfg.careful_epochs;
    return n_targets * cfg.quick_epochs + cfg.careful_epochs;
}

RunLog run_schedule(Network& net, const Dataset& train_set, const Dataset& eval_set,
                    const ScheduleConfig& cfg) {
    check(cfg.quick_epochs >= 0 && cfg.careful_epochs >= 0, "negative epoch count");
    std::vector<std::string> targets = cfg.targets;
    const std::vector<std::string> legal = prunable_layers(net.spec);
    if (targets.empty()) targets = legal;
    for (const std::string& t : targets)
        check(std::find(legal.begin(), legal.end(), t) != legal.end(),
              "'" + t + "' is not a prunable conv layer here");
    check(!targets.empty(), "nothing to prune");

    RunLog log;
    log.strategy = cfg.strategy;
    log.criterion = cfg.criterion;
    log.keep_ratio = cfg.keep_ratio;
    log.declared_budget = declared_epoch_budget(cfg, static_cast<int>(targets.size()));

    const int per = std::min(cfg.stats_per_class, min_class_count(eval_set));
    check(per >= 1, "eval set is missing a class");
    const Dataset score_set = stratified_sample(eval_set, per, cfg.seed);

    auto measure = [&](const std::string& action, const std::string& layer, int epochs,
                       double loss) {
        StageRecord r;
        r.action = action;
        r.layer = layer;
        r.epochs = epochs;
        r.loss = loss;
        r.accuracy = evaluate(net, eval_set).top1 * 100.0;
        const CostReport c = cost_report(net.spec);
        r.flops = c.totals.flops[0];
        r.params = c.totals.params[0];
        log.stages.push_back(r);
        return r.accuracy;
    };

    std::uint32_t salt = 1;
    auto tune = [&](int epochs, const std::vector<std::pair<int, float>>& lrs,
                    const std::string& action) {
        if (epochs <= 0) return log.stages.back().accuracy;
        TrainOptions opt;
        opt.epochs = epochs;
        opt.lr_schedule = lrs;
        opt.batch = cfg.batch;
        opt.seed = cfg.seed + salt++;
        opt.momentum = cfg.momentum;
        opt.weight_decay = cfg.weight_decay;
        const std::vector<EpochLog> el = train_epochs(net, train_set, opt);
        log.epochs_used += epochs;
        return measure(action, "", epochs, el.back().loss);
    };

    double acc = measure("baseline", "", 0, 0.0);
    log.baseline_accuracy = acc;
    log.baseline_flops = log.stages.front().flops;
    log.baseline_params = log.stages.front().params;

    switch (cfg.strategy) {
        case Strategy::Staged:
            for (const std::string& t : targets) {
                const double before = acc;
                const ChannelScores s =
                    score_layer(net, score_set, cfg.criterion, t, cfg.entropy, cfg.batch);
                std::vector<int> keep = rank_channels(s, cfg.keep_ratio);
                prune_conv_layer(net, t, keep);
                log.plan.targets.push_back({t, std::move(keep)});
                acc = measure("prune", t, 0, 0.0);
                acc = tune(cfg.quick_epochs, {{0, cfg.quick_lr}}, "quick_tune");
                if (cfg.adaptive_quick && before - acc > cfg.quick_extra_drop)
                    acc = tune(1, {{0, cfg.quick_lr}}, "quick_tune_extra");
            }
            acc = tune(cfg.careful_epochs, cfg.careful_lr, "careful_tune");
            break;
        case Strategy::OneShot: {
            for (const std::string& t : targets) {
                const ChannelScores s =
                    score_layer(net, score_set, cfg.criterion, t, cfg.entropy, cfg.batch);
                log.plan.targets.push_back({t, rank_channels(s, cfg.keep_ratio)});
            }
            apply_plan(net, log.plan);
            acc = measure("prune", "all", 0, 0.0);
            const int budget = log.declared_budget;
            acc = tune(budget, scale_schedule(cfg.careful_lr, cfg.careful_epochs, budget),
                       "careful_tune");
            break;
        }
        case Strategy::PerLayer:
            for (const std::string& t : targets) {
                const ChannelScores s =
                    score_layer(net, score_set, cfg.criterion, t, cfg.entropy, cfg.batch);
                std::vector<int> keep = rank_channels(s, cfg.keep_ratio);
                prune_conv_layer(net, t, keep);
                log.plan.targets.push_back({t, std::move(keep)});
                acc = measure("prune", t, 0, 0.0);
                acc = tune(cfg.careful_epochs, cfg.careful_lr, "careful_tune");
            }
            break;
    }

    log.final_accuracy = acc;
    log.final_flops = log.stages.back().flops;
    log.final_params = log.stages.back().params;
    return log;
}

std::string run_log_csv(const RunLog& log) {
    std::string out = "stage,action,layer,epochs,loss,accuracy,flops,params\n";
    char buf[160];
    for (size_t i = 0; i < log.stages.size(); ++i) {
        const StageRecord& r = log.stages[i];
        std::snprintf(buf, sizeof buf, "%zu,%s,%s,%d,%.6g,%.4f,%lld,%lld\n", i,
                      r.action.c_str(), r.layer.c_str(), r.epochs, r.loss, r.accuracy,
                      static_cast<long long>(r.flops), static_cast<long long>(r.params));
        out += buf;
    }
    return out;
}

std::string render_run_log(const RunLog& log) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "strategy %s criterion %s keep %.2f\n",
                  strategy_name(log.strategy).c_str(), log.criterion.c_str(),
                  log.keep_ratio);
    std::string out = buf;
    for (size_t i = 0; i < log.stages.size(); ++i) {
        const StageRecord& r = log.stages[i];
        std::string what = r.action;
        if (!r.layer.empty()) what += ' ' + r.layer;
        if (r.epochs > 0) what += " (" + std::to_string(r.epochs) + " ep)";
        std::snprintf(buf, sizeof buf, "[%2zu] %-28s acc %6.2f  flops %lld  params %lld\n",
                      i, what.c_str(), r.accuracy, static_cast<long long>(r.flops),
                      static_cast<long long>(r.params));
        out += buf;
    }
    std::snprintf(buf, sizeof buf, "budget %d epochs, used %d; accuracy %.2f -> %.2f\n",
                  log.declared_budget, log.epochs_used, log.baseline_accuracy,
                  log.final_accuracy);
    out += buf;
    return out;
}

std::vector<CriterionOutcome> compare_criteria(const Network& base,
                                               const Dataset& train_set,
                                               const Dataset& eval_set,
                                               const ScheduleConfig& cfg,
                                               const std::vector<std::string>& criteria) {
    check(!criteria.empty(), "no criteria to compare");
    std::vector<CriterionOutcome> out;
    for (const std::string& c : criteria) {
        Network net = base;
        ScheduleConfig run_cfg = cfg;
        run_cfg.criterion = c;
        out.push_back({c, run_schedule(net, train_set, eval_set, run_cfg)});
    }
    return out;
}

} // namespace prunekit
