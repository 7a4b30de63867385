#include "prunekit/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "prunekit/rng.hpp"

namespace prunekit {

namespace {

// forward walk from a top-level conv to the conv or fc that consumes its
// channels; anything else on the way must be channel-preserving
struct ConsumerWalk {
    std::string consumer;
    LayerKind consumer_kind = LayerKind::Conv;
    int fc_in_h = 1, fc_in_w = 1;
    std::vector<std::string> bns;
    std::string error;
};

ConsumerWalk walk_consumer(const std::vector<LayoutEntry>& lay, size_t from) {
    ConsumerWalk wk;
    for (size_t j = from + 1; j < lay.size(); ++j) {
        const LayoutEntry& e = lay[j];
        if (!e.block.empty()) {
            wk.error = "its output feeds residual block '" + e.block + "'";
            return wk;
        }
        if (e.kind == LayerKind::Relu || e.kind == LayerKind::MaxPool ||
            e.kind == LayerKind::Gap)
            continue;
        if (e.kind == LayerKind::BatchNorm) {
            wk.bns.push_back(e.name);
            continue;
        }
        if (e.kind == LayerKind::Conv) {
            wk.consumer = e.name;
            wk.consumer_kind = LayerKind::Conv;
            return wk;
        }
        if (e.kind == LayerKind::Fc) {
            wk.consumer = e.name;
            wk.consumer_kind = LayerKind::Fc;
            wk.fc_in_h = e.in_h;
            wk.fc_in_w = e.in_w;
            return wk;
        }
        break; // softmax: the logits width is fixed
    }
    wk.error = "it has no downstream conv or fc to absorb the change";
    return wk;
}

void validate_keep(const std::vector<int>& keep, int out_c, const std::string& layer) {
    check(!keep.empty(), "empty keep set for '" + layer + "'");
    check(static_cast<int>(keep.size()) <= out_c,
          "keep set larger than '" + layer + "' (" + std::to_string(out_c) + " channels)");
    for (size_t i = 0; i < keep.size(); ++i) {
        check(keep[i] >= 0 && keep[i] < out_c,
              "keep index " + std::to_string(keep[i]) + " out of range for '" + layer +
                  "' (" + std::to_string(out_c) + " channels)");
        check(i == 0 || keep[i] > keep[i - 1],
              "keep set for '" + layer + "' must be strictly ascending");
    }
}

ConvWeights keep_out_channels(const ConvWeights& w, const std::vector<int>& keep) {
    ConvWeights r(static_cast<int>(keep.size()), w.in_channels, w.kernel);
    const size_t per = static_cast<size_t>(w.in_channels) * w.kernel * w.kernel;
    for (size_t o = 0; o < keep.size(); ++o) {
        std::copy_n(w.filters.begin() + per * keep[o], per, r.filters.begin() + per * o);
        r.bias[o] = w.bias[keep[o]];
    }
    return r;
}

ConvWeights keep_in_channels(const ConvWeights& w, const std::vector<int>& keep) {
    ConvWeights r(w.out_channels, static_cast<int>(keep.size()), w.kernel);
    for (int o = 0; o < w.out_channels; ++o)
        for (size_t j = 0; j < keep.size(); ++j)
            for (int y = 0; y < w.kernel; ++y)
                for (int x = 0; x < w.kernel; ++x)
                    r.at(o, static_cast<int>(j), y, x) = w.at(o, keep[j], y, x);
    r.bias = w.bias;
    return r;
}

// fc consumes the flattened (c, h, w) volume; dropping channel j removes the
// whole column block [j*h*w, (j+1)*h*w)
FcWeights keep_fc_columns(const FcWeights& w, const std::vector<int>& keep, int h, int x_w) {
    const int hw = h * x_w;
    check(w.in_units % hw == 0, "fc input is not a whole number of channel blocks");
    FcWeights r(w.out_units, static_cast<int>(keep.size()) * hw);
    for (int o = 0; o < w.out_units; ++o)
        for (size_t j = 0; j < keep.size(); ++j)
            for (int t = 0; t < hw; ++t)
                r.weights[static_cast<size_t>(o) * r.in_units + j * hw + t] =
                    w.weights[static_cast<size_t>(o) * w.in_units +
                              static_cast<size_t>(keep[j]) * hw + t];
    r.bias = w.bias;
    return r;
}

BatchNormParams keep_bn_channels(const BatchNormParams& p, const std::vector<int>& keep) {
    BatchNormParams r(static_cast<int>(keep.size()), p.epsilon);
    for (size_t j = 0; j < keep.size(); ++j) {
        r.scale[j] = p.scale[keep[j]];
        r.shift[j] = p.shift[keep[j]];
        r.running_mean[j] = p.running_mean[keep[j]];
        r.running_var[j] = p.running_var[keep[j]];
    }
    return r;
}

LayerSpec* find_layer_spec(NetworkSpec& spec, const std::string& name) {
    for (UnitSpec& u : spec.units)
        if (LayerSpec* l = std::get_if<LayerSpec>(&u); l && l->name == name) return l;
    return nullptr;
}

ResidualBlockSpec* find_block_spec(NetworkSpec& spec, const std::string& name) {
    for (UnitSpec& u : spec.units)
        if (ResidualBlockSpec* b = std::get_if<ResidualBlockSpec>(&u); b && b->name == name)
            return b;
    return nullptr;
}

void prune_block_middle(Network& net, const std::string& block,
                        const std::vector<int>& keep) {
    const std::string c2 = block + ".conv2";
    const std::string b2 = block + ".bn2";
    const std::string c3 = block + ".conv3";
    net.conv[c2] = keep_out_channels(net.conv.at(c2), keep);
    if (auto it = net.bn.find(b2); it != net.bn.end())
        it->second = keep_bn_channels(it->second, keep);
    net.conv[c3] = keep_in_channels(net.conv.at(c3), keep);
    ResidualBlockSpec* bs = find_block_spec(net.spec, block);
    check(bs != nullptr, "no block spec for '" + block + "'");
    bs->stage2_channels = static_cast<int>(keep.size());
}

} // namespace

std::vector<std::string> prunable_layers(const NetworkSpec& spec) {
    const std::vector<LayoutEntry> lay = layout(spec);
    std::vector<std::string> out;
    for (size_t i = 0; i < lay.size(); ++i) {
        if (lay[i].kind != LayerKind::Conv) continue;
        if (!lay[i].block.empty()) {
            if (lay[i].stage == 2) out.push_back(lay[i].name);
            continue;
        }
        if (walk_consumer(lay, i).error.empty()) out.push_back(lay[i].name);
    }
    return out;
}

void prune_conv_layer(Network& net, const std::string& layer,
                      const std::vector<int>& keep) {
    const std::vector<LayoutEntry> lay = layout(net.spec);
    size_t idx = lay.size();
    for (size_t i = 0; i < lay.size(); ++i)
        if (lay[i].name == layer) idx = i;
    check(idx < lay.size(), "no unit named '" + layer + "'");
    const LayoutEntry& e = lay[idx];
    check(e.kind == LayerKind::Conv, "'" + layer + "' is not a conv layer");
    validate_keep(keep, e.out_c, layer);

    if (!e.block.empty()) {
        if (e.stage == 2) {
            prune_block_middle(net, e.block, keep);
            return;
        }
        if (e.stage == 3)
            fail("cannot prune '" + layer +
                 "': the block output must stay as wide as its shortcut input");
        fail("cannot prune '" + layer +
             "': only the middle conv of a residual block can be pruned");
    }

    const ConsumerWalk wk = walk_consumer(lay, idx);
    if (!wk.error.empty()) fail("cannot prune '" + layer + "': " + wk.error);

    net.conv[layer] = keep_out_channels(net.conv.at(layer), keep);
    for (const std::string& bn : wk.bns)
        net.bn[bn] = keep_bn_channels(net.bn.at(bn), keep);
    if (wk.consumer_kind == LayerKind::Conv)
        net.conv[wk.consumer] = keep_in_channels(net.conv.at(wk.consumer), keep);
    else
        net.fc[wk.consumer] =
            keep_fc_columns(net.fc.at(wk.consumer), keep, wk.fc_in_h, wk.fc_in_w);

    LayerSpec* ls = find_layer_spec(net.spec, layer);
    check(ls != nullptr, "no layer spec for '" + layer + "'");
    ls->out_channels = static_cast<int>(keep.size());
}

void replace_fc_head_with_gap(Network& net, unsigned seed) {
    int first_fc = -1;
    for (size_t i = 0; i < net.spec.units.size(); ++i)
        if (const LayerSpec* l = std::get_if<LayerSpec>(&net.spec.units[i]);
            l && l->kind == LayerKind::Fc) {
            first_fc = static_cast<int>(i);
            break;
        }
    check(first_fc > 0, "network has no fc head");

    std::string last_fc;
    int classes = 0;
    std::vector<std::string> removed_fc;
    const LayerSpec* tail_softmax = nullptr;
    for (size_t i = first_fc; i < net.spec.units.size(); ++i) {
        const LayerSpec* l = std::get_if<LayerSpec>(&net.spec.units[i]);
        check(l != nullptr, "a residual block sits inside the fc head");
        if (l->kind == LayerKind::Fc) {
            removed_fc.push_back(l->name);
            last_fc = l->name;
            classes = l->units;
        } else if (l->kind == LayerKind::Softmax) {
            tail_softmax = l;
        } else {
            check(l->kind == LayerKind::Relu,
                  "'" + l->name + "' interrupts the fc head");
        }
    }

    const std::vector<LayoutEntry> lay = layout(net.spec);
    const LayoutEntry* fc_entry = find_entry(lay, removed_fc.front());
    const int width = fc_entry->in_c;

    const LayerSpec* before = std::get_if<LayerSpec>(&net.spec.units[first_fc - 1]);
    const bool have_gap = before && before->kind == LayerKind::Gap;
    if (!have_gap)
        for (size_t i = 0; i < static_cast<size_t>(first_fc); ++i)
            if (const LayerSpec* l = std::get_if<LayerSpec>(&net.spec.units[i]);
                l && l->name == "gap")
                fail("a unit named 'gap' is already present");

    NetworkSpec ns;
    ns.input_c = net.spec.input_c;
    ns.input_h = net.spec.input_h;
    ns.input_w = net.spec.input_w;
    ns.units.assign(net.spec.units.begin(), net.spec.units.begin() + first_fc);
    if (!have_gap) {
        LayerSpec g;
        g.name = "gap";
        g.kind = LayerKind::Gap;
        ns.units.push_back(g);
    }
    LayerSpec nf;
    nf.name = last_fc;
    nf.kind = LayerKind::Fc;
    nf.units = classes;
    ns.units.push_back(nf);
    if (tail_softmax) ns.units.push_back(*tail_softmax);
    validate_spec(ns);

    for (const std::string& name : removed_fc) net.fc.erase(name);
    FcWeights w(classes, width);
    std::mt19937 gen(seed);
    const float bound = std::sqrt(6.0f / static_cast<float>(width + classes));
    for (float& v : w.weights) v = uniform_float(gen, -bound, bound);
    net.fc[last_fc] = std::move(w);
    net.spec = std::move(ns);
}

ChannelScores score_layer(Network& net, const Dataset& eval_set,
                          const std::string& criterion, const std::string& layer,
                          const EntropyConfig& cfg, int batch) {
    if (criterion == "entropy")
        return entropy_score(collect_stats(net, eval_set, layer, batch), cfg);
    if (criterion == "apoz") return apoz_score(net, eval_set, layer, batch);
    if (criterion == "weight_sum") return weight_sum_score(net, layer);
    if (criterion == "taylor") return taylor_score(net, eval_set, layer, batch);
    fail("unknown criterion '" + criterion +
         "' (expected entropy, apoz, weight_sum or taylor)");
}

PruningPlan build_and_apply_plan(Network& net, const Dataset& eval_set,
                                 const std::string& criterion, double keep_ratio,
                                 const std::vector<std::string>& layers,
                                 const EntropyConfig& cfg, int batch) {
    PruningPlan plan;
    for (const std::string& layer : layers) {
        const ChannelScores s = score_layer(net, eval_set, criterion, layer, cfg, batch);
        std::vector<int> keep = rank_channels(s, keep_ratio);
        prune_conv_layer(net, layer, keep);
        plan.targets.push_back({layer, std::move(keep)});
    }
    return plan;
}

void apply_plan(Network& net, const PruningPlan& plan) {
    for (const PruneTarget& t : plan.targets) prune_conv_layer(net, t.layer, t.keep);
}

std::string plan_text(const PruningPlan& plan) {
    std::string out = "prunekit-plan v1\n";
    for (const PruneTarget& t : plan.targets) {
        out += "keep " + t.layer;
        for (int j : t.keep) out += ' ' + std::to_string(j);
        out += '\n';
    }
    return out;
}

PruningPlan parse_plan(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    check(static_cast<bool>(std::getline(in, line)), "empty plan");
    check(line == "prunekit-plan v1", "not a plan file (bad header)");
    PruningPlan plan;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        check(static_cast<bool>(ls >> word) && word == "keep",
              "bad plan line: " + line);
        PruneTarget t;
        check(static_cast<bool>(ls >> t.layer), "plan line missing layer: " + line);
        int v = 0;
        while (ls >> v) t.keep.push_back(v);
        check(ls.eof(), "bad channel index in plan line: " + line);
        check(!t.keep.empty(), "plan line keeps nothing: " + line);
        plan.targets.push_back(std::move(t));
    }
    return plan;
}

} // namespace prunekit
