#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prunekit/config.hpp"
#include "prunekit/cost_model.hpp"
#include "prunekit/criteria.hpp"
#include "prunekit/dataset.hpp"
#include "prunekit/presets.hpp"
#include "prunekit/pruner.hpp"
#include "prunekit/schedule.hpp"
#include "prunekit/serialize.hpp"
#include "prunekit/train.hpp"

using namespace prunekit;

namespace {

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    check(f.good(), "cannot write " + path);
    f << text;
    check(f.good(), "write failed for " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), "cannot read " + path);
    std::string s((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return s;
}

void echo_config(const RunConfig& cfg) {
    std::cerr << "resolved config:\n" << config_text(cfg);
}

void check_data_shape(const Network& net, const Dataset& ds, const std::string& what) {
    check(ds.images.c == net.spec.input_c && ds.images.h == net.spec.input_h &&
              ds.images.w == net.spec.input_w,
          what + " shape " + std::to_string(ds.images.c) + "x" +
              std::to_string(ds.images.h) + "x" + std::to_string(ds.images.w) +
              " does not match the network input " + std::to_string(net.spec.input_c) +
              "x" + std::to_string(net.spec.input_h) + "x" +
              std::to_string(net.spec.input_w));
}

ScheduleConfig schedule_config_from(const RunConfig& cfg,
                                    const std::vector<std::string>& layers) {
    ScheduleConfig sc;
    sc.targets = layers;
    sc.criterion = cfg.criterion;
    sc.keep_ratio = cfg.keep_ratio;
    sc.entropy.bins = cfg.bins;
    sc.strategy = strategy_from_name(cfg.strategy);
    sc.quick_epochs = cfg.quick_epochs;
    sc.adaptive_quick = cfg.adaptive_quick;
    sc.quick_extra_drop = cfg.quick_extra_drop;
    sc.quick_lr = cfg.quick_lr;
    sc.careful_epochs = cfg.careful_epochs;
    sc.stats_per_class = cfg.stats_per_class;
    sc.batch = cfg.batch;
    sc.seed = cfg.seed;
    sc.momentum = cfg.momentum;
    sc.weight_decay = cfg.weight_decay;
    return sc;
}

// flags beat config file beats defaults
struct ConfigCli {
    CLI::App* app = nullptr;
    std::string config_path;
    RunConfig flags; // raw flag values, applied only when the flag was given

    void attach(CLI::App* a) {
        app = a;
        a->add_option("--config", config_path, "key=value config file");
        a->add_option("--arch", flags.arch, "network preset");
        a->add_option("--classes", flags.classes, "synthetic class count");
        a->add_option("--train-per-class", flags.train_per_class, "synthetic train images per class");
        a->add_option("--eval-per-class", flags.eval_per_class, "synthetic eval images per class");
        a->add_option("--data-seed", flags.data_seed, "synthetic data seed");
        a->add_option("--seed", flags.seed, "training / scoring seed");
        a->add_option("--batch", flags.batch, "minibatch size");
        a->add_option("--epochs", flags.epochs, "training epochs");
        a->add_option("--lr", flags.lr, "learning rate");
        a->add_option("--momentum", flags.momentum, "sgd momentum");
        a->add_option("--weight-decay", flags.weight_decay, "sgd weight decay");
        a->add_option("--criterion", flags.criterion, "entropy, apoz, weight_sum or taylor");
        a->add_option("--keep-ratio", flags.keep_ratio, "fraction of channels kept");
        a->add_option("--bins", flags.bins, "entropy histogram bins");
        a->add_option("--strategy", flags.strategy, "staged, one_shot or per_layer");
        a->add_option("--quick-epochs", flags.quick_epochs, "quick tune epochs per pruned layer");
        a->add_flag("--adaptive,!--no-adaptive", flags.adaptive_quick,
                    "extra quick epoch after a bad accuracy drop");
        a->add_option("--quick-extra-drop", flags.quick_extra_drop,
                      "accuracy drop (points) that triggers the extra epoch");
        a->add_option("--quick-lr", flags.quick_lr, "quick tune learning rate");
        a->add_option("--careful-epochs", flags.careful_epochs, "careful tune epochs");
        a->add_option("--stats-per-class", flags.stats_per_class,
                      "eval images per class used for scoring");
    }

    RunConfig resolve() const {
        RunConfig cfg;
        if (!config_path.empty()) cfg = load_config(config_path);
        auto take = [&](const char* flag, auto member) {
            if (app->count(flag)) cfg.*member = flags.*member;
        };
        take("--arch", &RunConfig::arch);
        take("--classes", &RunConfig::classes);
        take("--train-per-class", &RunConfig::train_per_class);
        take("--eval-per-class", &RunConfig::eval_per_class);
        take("--data-seed", &RunConfig::data_seed);
        take("--seed", &RunConfig::seed);
        take("--batch", &RunConfig::batch);
        take("--epochs", &RunConfig::epochs);
        take("--lr", &RunConfig::lr);
        take("--momentum", &RunConfig::momentum);
        take("--weight-decay", &RunConfig::weight_decay);
        take("--criterion", &RunConfig::criterion);
        take("--keep-ratio", &RunConfig::keep_ratio);
        take("--bins", &RunConfig::bins);
        take("--strategy", &RunConfig::strategy);
        take("--quick-epochs", &RunConfig::quick_epochs);
        if (app->count("--adaptive") || app->count("--no-adaptive"))
            cfg.adaptive_quick = flags.adaptive_quick;
        take("--quick-extra-drop", &RunConfig::quick_extra_drop);
        take("--quick-lr", &RunConfig::quick_lr);
        take("--careful-epochs", &RunConfig::careful_epochs);
        take("--stats-per-class", &RunConfig::stats_per_class);
        return cfg;
    }
};

Dataset load_or_synth(const std::string& path, const RunConfig& cfg, int per_class,
                      std::uint32_t seed_shift) {
    if (!path.empty()) return load_dataset(path);
    const NetworkSpec spec = preset_spec(cfg.arch, cfg.classes);
    std::cerr << "no dataset given, synthesizing " << cfg.classes << "x" << per_class
              << " images (seed " << cfg.data_seed + seed_shift << ")\n";
    return synth_dataset(cfg.classes, per_class, spec.input_c, spec.input_h, spec.input_w,
                         cfg.data_seed + seed_shift);
}

int cmd_synth(const std::string& out, int classes, int per_class, int channels, int height,
              int width, std::uint32_t seed, float noise) {
    std::cerr << "synth: classes = " << classes << ", per_class = " << per_class
              << ", shape = " << channels << "x" << height << "x" << width
              << ", seed = " << seed << ", noise = " << noise << "\n";
    const Dataset ds = synth_dataset(classes, per_class, channels, height, width, seed, noise);
    save_dataset(ds, out);
    std::cout << "wrote " << ds.count() << " images to " << out << "\n";
    return 0;
}

int cmd_train(const ConfigCli& cc, const std::string& model_in, const std::string& data,
              const std::string& eval_path, const std::string& out) {
    const RunConfig cfg = cc.resolve();
    echo_config(cfg);
    const Dataset train_set = load_or_synth(data, cfg, cfg.train_per_class, 0);
    Network net = model_in.empty() ? init_network(preset_spec(cfg.arch, train_set.classes), cfg.seed)
                                   : load_model(model_in);
    check_data_shape(net, train_set, "train data");

    TrainOptions opt;
    opt.epochs = cfg.epochs;
    opt.lr_schedule = {{0, cfg.lr}};
    opt.batch = cfg.batch;
    opt.seed = cfg.seed;
    opt.momentum = cfg.momentum;
    opt.weight_decay = cfg.weight_decay;
    const std::vector<EpochLog> logs = train_epochs(net, train_set, opt);
    for (const EpochLog& l : logs) {
        std::string extra;
        if (l.skipped_steps)
            extra = "  (skipped " + std::to_string(l.skipped_steps) + " steps)";
        std::printf("epoch %d  lr %g  loss %.4f  train acc %.2f%%%s\n", l.epoch,
                    static_cast<double>(l.lr), l.loss, l.accuracy * 100.0, extra.c_str());
    }

    if (!eval_path.empty()) {
        Dataset eval_set = load_dataset(eval_path);
        check_data_shape(net, eval_set, "eval data");
        const EvalResult r = evaluate(net, eval_set, cfg.batch);
        std::printf("eval top-1 %.2f%%", r.top1 * 100.0);
        if (r.has_top5) std::printf("  top-5 %.2f%%", r.top5 * 100.0);
        std::printf("  (%d images)\n", r.count);
    }
    save_model(net, out);
    std::cout << "wrote model to " << out << "\n";
    return 0;
}

int cmd_stats(const std::string& model, const std::string& data, const std::string& layer,
              const std::string& out, int batch) {
    Network net = load_model(model);
    const Dataset ds = load_dataset(data);
    check_data_shape(net, ds, "eval data");
    std::cerr << "stats: layer = " << layer << ", images = " << ds.count()
              << ", batch = " << batch << "\n";
    const ChannelStats st = collect_stats(net, ds, layer, batch);
    std::cerr << "tap = " << st.tap << ", channels = " << st.channels << "\n";
    if (out.empty()) {
        std::cout << "layer,tap,row,channel,value\n";
        char buf[64];
        for (int r = 0; r < st.rows; ++r)
            for (int j = 0; j < st.channels; ++j) {
                std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(st.at(r, j)));
                std::cout << st.layer << ',' << st.tap << ',' << r << ',' << j << ','
                          << buf << "\n";
            }
    } else {
        write_stats_csv(st, out);
        std::cout << "wrote " << st.rows << "x" << st.channels << " stats to " << out
                  << "\n";
    }
    return 0;
}

int cmd_score(const std::string& model, const std::string& data, const std::string& layer,
              const std::string& criterion, int bins, int batch, const std::string& out) {
    Network net = load_model(model);
    Dataset ds;
    if (criterion != "weight_sum") {
        check(!data.empty(), "--data is required for criterion '" + criterion + "'");
        ds = load_dataset(data);
        check_data_shape(net, ds, "eval data");
    }
    std::cerr << "score: layer = " << layer << ", criterion = " << criterion
              << ", bins = " << bins << ", batch = " << batch << "\n";
    EntropyConfig ec;
    ec.bins = bins;
    const ChannelScores s = score_layer(net, ds, criterion, layer, ec, batch);
    const std::string csv = scores_csv(s);
    if (out.empty()) std::cout << csv;
    else {
        write_text(out, csv);
        std::cout << "wrote " << s.scores.size() << " scores to " << out << "\n";
    }
    return 0;
}

int cmd_prune(const ConfigCli& cc, const std::string& model, const std::string& data,
              const std::vector<std::string>& layers, const std::string& plan_in,
              const std::string& plan_out, const std::string& out) {
    const RunConfig cfg = cc.resolve();
    echo_config(cfg);
    Network net = load_model(model);
    const NetworkSpec before = net.spec;

    PruningPlan plan;
    if (!plan_in.empty()) {
        plan = parse_plan(read_text(plan_in));
        apply_plan(net, plan);
    } else {
        check(!data.empty(), "need --data to score (or --plan to replay)");
        const Dataset ds = load_dataset(data);
        check_data_shape(net, ds, "eval data");
        std::vector<std::string> targets = layers;
        if (targets.empty()) targets = prunable_layers(net.spec);
        EntropyConfig ec;
        ec.bins = cfg.bins;
        plan = build_and_apply_plan(net, ds, cfg.criterion, cfg.keep_ratio, targets, ec,
                                    cfg.batch);
    }

    if (!plan_out.empty()) {
        write_text(plan_out, plan_text(plan));
        std::cout << "wrote plan to " << plan_out << "\n";
    }
    save_model(net, out);
    std::cout << "wrote model to " << out << "\n";
    std::cout << render_report_text(cost_report(before, net.spec));
    return 0;
}

int cmd_schedule(const ConfigCli& cc, const std::string& model, const std::string& train_path,
                 const std::string& eval_path, const std::vector<std::string>& layers,
                 const std::string& out, const std::string& log_out,
                 const std::string& plan_out) {
    const RunConfig cfg = cc.resolve();
    echo_config(cfg);
    Network net = load_model(model);
    const Dataset train_set = load_dataset(train_path);
    const Dataset eval_set = load_dataset(eval_path);
    check_data_shape(net, train_set, "train data");
    check_data_shape(net, eval_set, "eval data");

    const ScheduleConfig sc = schedule_config_from(cfg, layers);
    const RunLog log = run_schedule(net, train_set, eval_set, sc);
    std::cout << render_run_log(log);
    if (!log_out.empty()) {
        write_text(log_out, run_log_csv(log));
        std::cout << "wrote log to " << log_out << "\n";
    }
    if (!plan_out.empty()) {
        write_text(plan_out, plan_text(log.plan));
        std::cout << "wrote plan to " << plan_out << "\n";
    }
    if (!out.empty()) {
        save_model(net, out);
        std::cout << "wrote model to " << out << "\n";
    }
    return 0;
}

int cmd_compare(const ConfigCli& cc, const std::string& model, const std::string& train_path,
                const std::string& eval_path, const std::vector<std::string>& layers,
                std::vector<std::string> criteria, const std::string& log_out) {
    const RunConfig cfg = cc.resolve();
    echo_config(cfg);
    const Network base = load_model(model);
    const Dataset train_set = load_dataset(train_path);
    const Dataset eval_set = load_dataset(eval_path);
    if (criteria.empty()) criteria = {"entropy", "apoz", "weight_sum", "taylor"};

    const ScheduleConfig sc = schedule_config_from(cfg, layers);
    const std::vector<CriterionOutcome> res =
        compare_criteria(base, train_set, eval_set, sc, criteria);

    std::string csv = "criterion,baseline_accuracy,final_accuracy,epochs_used,flops,params\n";
    std::printf("%-12s %9s %9s %7s\n", "criterion", "baseline", "final", "epochs");
    char buf[200];
    for (const CriterionOutcome& o : res) {
        std::printf("%-12s %8.2f%% %8.2f%% %7d\n", o.criterion.c_str(),
                    o.log.baseline_accuracy, o.log.final_accuracy, o.log.epochs_used);
        std::snprintf(buf, sizeof buf, "%s,%.4f,%.4f,%d,%lld,%lld\n", o.criterion.c_str(),
                      o.log.baseline_accuracy, o.log.final_accuracy, o.log.epochs_used,
                      static_cast<long long>(o.log.final_flops),
                      static_cast<long long>(o.log.final_params));
        csv += buf;
    }
    if (!log_out.empty()) {
        write_text(log_out, csv);
        std::cout << "wrote comparison to " << log_out << "\n";
    }
    return 0;
}

int cmd_report(const std::string& model, const std::string& pruned_model,
               const std::string& arch, int classes, int batch, bool csv,
               const std::string& out) {
    check(model.empty() != arch.empty(), "pass exactly one of --model or --arch");
    CostReport rep;
    if (!arch.empty()) {
        std::cerr << "report: arch = " << arch << ", batch = " << batch << "\n";
        if (arch == "vgg16")
            rep = cost_report(vgg16_spec(), vgg16_halved_spec(), batch);
        else
            rep = cost_report(preset_spec(arch, classes), batch);
    } else {
        std::cerr << "report: model = " << model << ", batch = " << batch << "\n";
        const Network net = load_model(model);
        if (!pruned_model.empty())
            rep = cost_report(net.spec, load_model(pruned_model).spec, batch);
        else
            rep = cost_report(net.spec, batch);
    }
    const std::string text = csv ? render_report_csv(rep) : render_report_text(rep);
    if (out.empty()) std::cout << text;
    else {
        write_text(out, text);
        std::cout << "wrote report to " << out << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"structured filter pruning toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "write a synthetic labeled dataset");
    std::string sy_out;
    int sy_classes = 5, sy_per = 100, sy_c = 3, sy_h = 12, sy_w = 12;
    std::uint32_t sy_seed = 7;
    float sy_noise = 0.08f;
    synth->add_option("--out", sy_out, "output .pkds path")->required();
    synth->add_option("--classes", sy_classes, "class count");
    synth->add_option("--per-class", sy_per, "images per class");
    synth->add_option("--channels", sy_c, "image channels");
    synth->add_option("--height", sy_h, "image height");
    synth->add_option("--width", sy_w, "image width");
    synth->add_option("--seed", sy_seed, "generator seed");
    synth->add_option("--noise", sy_noise, "pixel noise amplitude");

    // train
    auto* train = app.add_subcommand("train", "train a preset or existing model");
    ConfigCli train_cc;
    train_cc.attach(train);
    std::string tr_model, tr_data, tr_eval, tr_out;
    train->add_option("--model", tr_model, "continue from this model");
    train->add_option("--data", tr_data, "training .pkds (synthesized when absent)");
    train->add_option("--eval", tr_eval, "eval .pkds scored after training");
    train->add_option("--out", tr_out, "output model path")->required();

    // stats
    auto* stats = app.add_subcommand("stats", "per-image channel means at a conv tap");
    std::string st_model, st_data, st_layer, st_out;
    int st_batch = 32;
    stats->add_option("--model", st_model, "model path")->required();
    stats->add_option("--data", st_data, "eval .pkds")->required();
    stats->add_option("--layer", st_layer, "conv layer name")->required();
    stats->add_option("--out", st_out, "output csv (stdout when absent)");
    stats->add_option("--batch", st_batch, "forward batch size");

    // score
    auto* score = app.add_subcommand("score", "channel importance for one layer");
    std::string sc_model, sc_data, sc_layer, sc_criterion = "entropy", sc_out;
    int sc_bins = 100, sc_batch = 32;
    score->add_option("--model", sc_model, "model path")->required();
    score->add_option("--data", sc_data, "eval .pkds (not needed for weight_sum)");
    score->add_option("--layer", sc_layer, "conv layer name")->required();
    score->add_option("--criterion", sc_criterion, "entropy, apoz, weight_sum or taylor");
    score->add_option("--bins", sc_bins, "entropy histogram bins");
    score->add_option("--batch", sc_batch, "forward batch size");
    score->add_option("--out", sc_out, "output csv (stdout when absent)");

    // prune
    auto* prune = app.add_subcommand("prune", "cut channels, by scores or a saved plan");
    ConfigCli prune_cc;
    prune_cc.attach(prune);
    std::string pr_model, pr_data, pr_plan_in, pr_plan_out, pr_out;
    std::vector<std::string> pr_layers;
    prune->add_option("--model", pr_model, "model path")->required();
    prune->add_option("--data", pr_data, "eval .pkds for scoring");
    prune->add_option("--layers", pr_layers, "target conv layers (default: all prunable)")
        ->delimiter(',');
    prune->add_option("--plan", pr_plan_in, "replay a saved plan instead of scoring");
    prune->add_option("--plan-out", pr_plan_out, "save the keep sets used");
    prune->add_option("--out", pr_out, "output model path")->required();

    // schedule
    auto* sched = app.add_subcommand("schedule", "prune and retune with a strategy");
    ConfigCli sched_cc;
    sched_cc.attach(sched);
    std::string sd_model, sd_train, sd_eval, sd_out, sd_log, sd_plan;
    std::vector<std::string> sd_layers;
    sched->add_option("--model", sd_model, "model path")->required();
    sched->add_option("--train", sd_train, "training .pkds")->required();
    sched->add_option("--eval", sd_eval, "eval .pkds")->required();
    sched->add_option("--layers", sd_layers, "target conv layers (default: all prunable)")
        ->delimiter(',');
    sched->add_option("--out", sd_out, "output model path");
    sched->add_option("--log-out", sd_log, "stage log csv");
    sched->add_option("--plan-out", sd_plan, "save the keep sets used");

    // compare
    auto* compare = app.add_subcommand("compare", "same schedule under several criteria");
    ConfigCli compare_cc;
    compare_cc.attach(compare);
    std::string cp_model, cp_train, cp_eval, cp_log;
    std::vector<std::string> cp_layers, cp_criteria;
    compare->add_option("--model", cp_model, "model path")->required();
    compare->add_option("--train", cp_train, "training .pkds")->required();
    compare->add_option("--eval", cp_eval, "eval .pkds")->required();
    compare->add_option("--layers", cp_layers, "target conv layers (default: all prunable)")
        ->delimiter(',');
    compare->add_option("--criteria", cp_criteria, "criteria to race (default: all four)")
        ->delimiter(',');
    compare->add_option("--log-out", cp_log, "comparison csv");

    // report
    auto* report = app.add_subcommand("report", "flops / params / activation accounting");
    std::string rp_model, rp_pruned, rp_arch, rp_out;
    int rp_classes = 5, rp_batch = 1;
    report->add_option("--model", rp_model, "model path");
    report->add_option("--pruned", rp_pruned, "pruned model to line up against --model");
    report->add_option("--arch", rp_arch,
                       "preset instead of a model (vgg16 reports full vs halved)");
    report->add_option("--classes", rp_classes, "class count for small presets");
    report->add_option("--batch", rp_batch, "batch size for activation sizes");
    std::string rp_format = "text";
    report->add_option("--format", rp_format, "text or csv")
        ->check(CLI::IsMember({"text", "csv"}));
    report->add_option("--out", rp_out, "output path (stdout when absent)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(sy_out, sy_classes, sy_per, sy_c, sy_h, sy_w, sy_seed, sy_noise);
        if (train->parsed()) return cmd_train(train_cc, tr_model, tr_data, tr_eval, tr_out);
        if (stats->parsed()) return cmd_stats(st_model, st_data, st_layer, st_out, st_batch);
        if (score->parsed())
            return cmd_score(sc_model, sc_data, sc_layer, sc_criterion, sc_bins, sc_batch,
                             sc_out);
        if (prune->parsed())
            return cmd_prune(prune_cc, pr_model, pr_data, pr_layers, pr_plan_in,
                             pr_plan_out, pr_out);
        if (sched->parsed())
            return cmd_schedule(sched_cc, sd_model, sd_train, sd_eval, sd_layers, sd_out,
                                sd_log, sd_plan);
        if (compare->parsed())
            return cmd_compare(compare_cc, cp_model, cp_train, cp_eval, cp_layers,
                               cp_criteria, cp_log);
        if (report->parsed())
            return cmd_report(rp_model, rp_pruned, rp_arch, rp_classes, rp_batch,
                              rp_format == "csv", rp_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
