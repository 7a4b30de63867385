#include "prunekit/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "prunekit/rng.hpp"

namespace prunekit {

namespace {

struct Velocities {
    std::map<std::string, ConvWeights> conv;
    std::map<std::string, FcWeights> fc;
    std::map<std::string, BatchNormParams> bn;
};

Velocities make_velocities(const Network& net) {
    Velocities v;
    for (const auto& [name, w] : net.conv)
        v.conv[name] = ConvWeights(w.out_channels, w.in_channels, w.kernel);
    for (const auto& [name, w] : net.fc) v.fc[name] = FcWeights(w.out_units, w.in_units);
    for (const auto& [name, p] : net.bn) {
        BatchNormParams z(p.channels, p.epsilon);
        z.scale.assign(p.channels, 0.0f);
        v.bn[name] = std::move(z);
    }
    return v;
}

Tensor gather_batch(const Dataset& ds, const std::vector<int>& order, int begin, int end,
                    std::vector<int>& labels) {
    const int n = end - begin;
    Tensor x(n, ds.images.c, ds.images.h, ds.images.w);
    labels.resize(n);
    const std::size_t plane = static_cast<std::size_t>(ds.images.c) * ds.images.h * ds.images.w;
    for (int i = 0; i < n; ++i) {
        const int src = order[begin + i];
        std::copy_n(ds.images.data.begin() + static_cast<std::ptrdiff_t>(src * plane), plane,
                    x.data.begin() + static_cast<std::ptrdiff_t>(i * plane));
        labels[i] = ds.labels[src];
    }
    return x;
}

bool all_finite(const std::vector<float>& v) {
    for (float x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

// applies nothing and returns false if any gradient entry is non-finite
bool step_network(Network& net, const NetworkGrads& grads, Velocities& vel, float lr,
                  float momentum, float weight_decay) {
    for (const auto& [name, g] : grads.conv)
        if (!all_finite(g.filters) || !all_finite(g.bias)) return false;
    for (const auto& [name, g] : grads.fc)
        if (!all_finite(g.weights) || !all_finite(g.bias)) return false;
    for (const auto& [name, g] : grads.bn)
        if (!all_finite(g.scale) || !all_finite(g.shift)) return false;
    for (auto& [name, w] : net.conv) {
        const auto it = grads.conv.find(name);
        if (it == grads.conv.end()) continue;
        sgd_step(w.filters, it->second.filters, vel.conv.at(name).filters, lr, momentum,
                 weight_decay);
        sgd_step(w.bias, it->second.bias, vel.conv.at(name).bias, lr, momentum, 0.0f);
    }
    for (auto& [name, w] : net.fc) {
        const auto it = grads.fc.find(name);
        if (it == grads.fc.end()) continue;
        sgd_step(w.weights, it->second.weights, vel.fc.at(name).weights, lr, momentum,
                 weight_decay);
        sgd_step(w.bias, it->second.bias, vel.fc.at(name).bias, lr, momentum, 0.0f);
    }
    for (auto& [name, p] : net.bn) {
        const auto it = grads.bn.find(name);
        if (it == grads.bn.end()) continue;
        sgd_step(p.scale, it->second.scale, vel.bn.at(name).scale, lr, momentum, 0.0f);
        sgd_step(p.shift, it->second.shift, vel.bn.at(name).shift, lr, momentum, 0.0f);
    }
    return true;
}

void zero_frozen(Network& net, Velocities* vel,
                 const std::map<std::string, std::vector<int>>& frozen) {
    for (const auto& [name, filters] : frozen) {
        auto it = net.conv.find(name);
        check(it != net.conv.end(), "frozen filter list names unknown conv layer '" + name + "'");
        ConvWeights& w = it->second;
        const std::size_t per_filter =
            static_cast<std::size_t>(w.in_channels) * w.kernel * w.kernel;
        for (int f : filters) {
            check(f >= 0 && f < w.out_channels,
                  "frozen filter " + std::to_string(f) + " out of range in '" + name + "'");
            std::fill_n(w.filters.begin() + static_cast<std::ptrdiff_t>(f * per_filter),
                        per_filter, 0.0f);
            w.bias[f] = 0.0f;
            if (vel) {
                ConvWeights& v = vel->conv.at(name);
                std::fill_n(v.filters.begin() + static_cast<std::ptrdiff_t>(f * per_filter),
                            per_filter, 0.0f);
                v.bias[f] = 0.0f;
            }
        }
    }
}

} // namespace

float lr_at(const std::vector<std::pair<int, float>>& schedule, int epoch) {
    check(!schedule.empty() && schedule.front().first == 0,
          "lr schedule must start at epoch 0");
    float lr = schedule.front().second;
    int prev = -1;
    for (const auto& [start, value] : schedule) {
        check(start > prev, "lr schedule epochs must be strictly increasing");
        check(value > 0.0f, "lr schedule values must be positive");
        prev = start;
        if (start <= epoch) lr = value;
    }
    return lr;
}

void zero_filters(Network& net, const std::map<std::string, std::vector<int>>& frozen) {
    zero_frozen(net, nullptr, frozen);
}

std::vector<EpochLog> train_epochs(Network& net, const Dataset& ds, const TrainOptions& opt) {
    check(ds.count() > 0, "training dataset is empty");
    check(opt.epochs >= 1, "epoch count must be >= 1");
    check(opt.batch >= 1, "batch size must be >= 1");
    lr_at(opt.lr_schedule, 0);

    std::mt19937 gen(opt.seed);
    Velocities vel = make_velocities(net);
    zero_frozen(net, &vel, opt.frozen_filters);

    std::vector<int> order(ds.count());
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLog> logs;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        const float lr = lr_at(opt.lr_schedule, epoch);
        shuffle_vec(order, gen);
        double loss_sum = 0.0;
        int correct = 0, skipped = 0;
        for (int begin = 0; begin < ds.count(); begin += opt.batch) {
            const int end = std::min(begin + opt.batch, ds.count());
            std::vector<int> labels;
            const Tensor x = gather_batch(ds, order, begin, end, labels);
            ForwardResult fwd = forward(net, x, Mode::Train);
            SoftmaxLoss sl = softmax_cross_entropy(fwd.logits, labels);
            if (!std::isfinite(sl.loss))
                fail("non-finite loss at epoch " + std::to_string(epoch) + ", sample offset " +
                     std::to_string(begin));
            loss_sum += sl.loss * (end - begin);
            for (int i = 0; i < fwd.logits.n; ++i) {
                int best = 0;
                for (int j = 1; j < fwd.logits.c; ++j)
                    if (fwd.logits.at(i, j, 0, 0) > fwd.logits.at(i, best, 0, 0)) best = j;
                if (best == labels[i]) ++correct;
            }
            NetworkGrads grads = backward(net, x, fwd, sl.grad_logits);
            if (!step_network(net, grads, vel, lr, opt.momentum, opt.weight_decay)) {
                ++skipped;
                std::fprintf(stderr,
                             "warning: non-finite gradient at epoch %d, sample offset %d; "
                             "step skipped\n",
                             epoch, begin);
            }
            zero_frozen(net, &vel, opt.frozen_filters);
        }
        EpochLog log;
        log.epoch = epoch;
        log.lr = lr;
        log.loss = loss_sum / ds.count();
        log.accuracy = static_cast<double>(correct) / ds.count();
        log.skipped_steps = skipped;
        logs.push_back(log);
    }
    return logs;
}

EvalResult evaluate(Network& net, const Dataset& ds, int batch) {
    check(ds.count() > 0, "evaluation dataset is empty");
    check(batch >= 1, "batch size must be >= 1");
    EvalResult r;
    r.count = ds.count();
    int top1 = 0, top5 = 0;
    std::vector<int> order(ds.count());
    std::iota(order.begin(), order.end(), 0);
    bool classes_checked = false;
    for (int begin = 0; begin < ds.count(); begin += batch) {
        const int end = std::min(begin + batch, ds.count());
        std::vector<int> labels;
        const Tensor x = gather_batch(ds, order, begin, end, labels);
        ForwardResult fwd = forward(net, x, Mode::Eval);
        check(fwd.logits.h == 1 && fwd.logits.w == 1,
              "network output " + fwd.logits.shape_str() + " is not a class vector");
        if (!classes_checked) {
            check(fwd.logits.c >= ds.classes,
                  "network emits " + std::to_string(fwd.logits.c) + " classes, dataset has " +
                      std::to_string(ds.classes));
            r.has_top5 = fwd.logits.c >= 5;
            classes_checked = true;
        }
        for (int i = 0; i < fwd.logits.n; ++i) {
            const int lab = labels[i];
            const float lv = fwd.logits.at(i, lab, 0, 0);
            int rank = 0; // classes strictly better, ties break toward lower index
            for (int j = 0; j < fwd.logits.c; ++j) {
                const float v = fwd.logits.at(i, j, 0, 0);
                if (v > lv || (v == lv && j < lab)) ++rank;
            }
            if (rank == 0) ++top1;
            if (rank < 5) ++top5;
        }
    }
    r.top1 = static_cast<double>(top1) / ds.count();
    r.top5 = r.has_top5 ? static_cast<double>(top5) / ds.count() : 0.0;
    return r;
}

} // namespace prunekit
