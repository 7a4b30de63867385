#include "prunekit/criteria.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "prunekit/ops.hpp"

namespace prunekit {

namespace {

int entry_index(const std::vector<LayoutEntry>& lay, const std::string& name) {
    for (size_t i = 0; i < lay.size(); ++i)
        if (lay[i].name == name) return static_cast<int>(i);
    fail("no unit named '" + name + "'");
}

// returns the layout index of the tap for a conv entry
int tap_index(const std::vector<LayoutEntry>& lay, const std::string& conv_layer) {
    const int ci = entry_index(lay, conv_layer);
    check(lay[ci].kind == LayerKind::Conv, "'" + conv_layer + "' is not a conv layer");
    int t = ci;
    if (t + 1 < static_cast<int>(lay.size()) && lay[t + 1].kind == LayerKind::BatchNorm &&
        lay[t + 1].block == lay[t].block)
        ++t;
    if (t + 1 < static_cast<int>(lay.size()) && lay[t + 1].kind == LayerKind::Relu &&
        lay[t + 1].block == lay[t].block)
        ++t;
    return t;
}

Tensor gather_rows(const Dataset& ds, int begin, int count) {
    Tensor b(count, ds.images.c, ds.images.h, ds.images.w);
    const size_t per = static_cast<size_t>(ds.images.c) * ds.images.h * ds.images.w;
    std::copy_n(ds.images.data.begin() + static_cast<size_t>(begin) * per,
                static_cast<size_t>(count) * per, b.data.begin());
    return b;
}

} // namespace

std::string activation_tap(const NetworkSpec& spec, const std::string& conv_layer) {
    const std::vector<LayoutEntry> lay = layout(spec);
    return lay[tap_index(lay, conv_layer)].name;
}

ChannelStats collect_stats(Network& net, const Dataset& eval_set,
                           const std::string& conv_layer, int batch) {
    check(batch >= 1, "batch must be >= 1");
    check(eval_set.count() > 0, "empty eval set");
    const std::vector<LayoutEntry> lay = layout(net.spec);
    const LayoutEntry& tap = lay[tap_index(lay, conv_layer)];

    ChannelStats st;
    st.layer = conv_layer;
    st.tap = tap.name;
    st.rows = eval_set.count();
    st.channels = tap.out_c;
    st.m.assign(static_cast<size_t>(st.rows) * st.channels, 0.0f);

    for (int begin = 0; begin < st.rows; begin += batch) {
        const int n = std::min(batch, st.rows - begin);
        const Tensor b = gather_rows(eval_set, begin, n);
        const ForwardResult fwd = forward(net, b, Mode::Eval);
        const Tensor& a = fwd.activations.at(tap.name);
        const double area = static_cast<double>(a.h) * a.w;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < a.c; ++j) {
                double acc = 0.0;
                for (int y = 0; y < a.h; ++y)
                    for (int x = 0; x < a.w; ++x) acc += a.at(i, j, y, x);
                st.at(begin + i, j) = static_cast<float>(acc / area);
            }
    }
    return st;
}

ChannelScores entropy_score(const ChannelStats& stats, const EntropyConfig& cfg) {
    check(cfg.bins >= 2, "entropy needs at least 2 bins");
    check(stats.rows >= 1 && stats.channels >= 1, "empty stats matrix");
    ChannelScores out;
    out.layer = stats.layer;
    out.criterion = "entropy";
    out.scores.resize(stats.channels);
    std::vector<int> counts(static_cast<size_t>(cfg.bins));
    for (int j = 0; j < stats.channels; ++j) {
        double lo = stats.at(0, j), hi = stats.at(0, j);
        for (int r = 1; r < stats.rows; ++r) {
            const double v = stats.at(r, j);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (!(hi > lo)) {
            out.scores[j] = 0.0;
            continue;
        }
        std::fill(counts.begin(), counts.end(), 0);
        const double width = hi - lo;
        for (int r = 0; r < stats.rows; ++r) {
            int idx = static_cast<int>((stats.at(r, j) - lo) / width * cfg.bins);
            idx = std::clamp(idx, 0, cfg.bins - 1);
            ++counts[idx];
        }
        double h = 0.0;
        for (int b = 0; b < cfg.bins; ++b)
            if (counts[b] > 0) {
                const double p = static_cast<double>(counts[b]) / stats.rows;
                h -= p * std::log(p);
            }
        out.scores[j] = h;
    }
    return out;
}

ChannelScores apoz_score(Network& net, const Dataset& eval_set,
                         const std::string& conv_layer, int batch) {
    check(batch >= 1, "batch must be >= 1");
    check(eval_set.count() > 0, "empty eval set");
    const std::vector<LayoutEntry> lay = layout(net.spec);
    const LayoutEntry& tap = lay[tap_index(lay, conv_layer)];
    check(tap.kind == LayerKind::Relu,
          "apoz needs a relu after '" + conv_layer + "' and there is none");

    std::vector<long long> zeros(static_cast<size_t>(tap.out_c), 0);
    long long per_channel = 0;
    for (int begin = 0; begin < eval_set.count(); begin += batch) {
        const int n = std::min(batch, eval_set.count() - begin);
        const Tensor b = gather_rows(eval_set, begin, n);
        const ForwardResult fwd = forward(net, b, Mode::Eval);
        const Tensor& a = fwd.activations.at(tap.name);
        per_channel += static_cast<long long>(n) * a.h * a.w;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < a.c; ++j)
                for (int y = 0; y < a.h; ++y)
                    for (int x = 0; x < a.w; ++x)
                        if (a.at(i, j, y, x) == 0.0f) ++zeros[j];
    }
    ChannelScores out;
    out.layer = conv_layer;
    out.criterion = "apoz";
    out.scores.resize(tap.out_c);
    for (int j = 0; j < tap.out_c; ++j)
        out.scores[j] = 1.0 - static_cast<double>(zeros[j]) / static_cast<double>(per_channel);
    return out;
}

ChannelScores weight_sum_score(const Network& net, const std::string& conv_layer) {
    const auto it = net.conv.find(conv_layer);
    check(it != net.conv.end(), "'" + conv_layer + "' is not a conv layer");
    const ConvWeights& w = it->second;
    ChannelScores out;
    out.layer = conv_layer;
    out.criterion = "weight_sum";
    out.scores.resize(w.out_channels);
    const size_t per = static_cast<size_t>(w.in_channels) * w.kernel * w.kernel;
    for (int o = 0; o < w.out_channels; ++o) {
        double acc = 0.0;
        for (size_t k = 0; k < per; ++k) acc += std::fabs(w.filters[per * o + k]);
        out.scores[o] = acc;
    }
    return out;
}

ChannelScores taylor_score(Network& net, const Dataset& eval_set,
                           const std::string& conv_layer, int batch) {
    check(batch >= 1, "batch must be >= 1");
    check(eval_set.count() > 0, "empty eval set");
    const std::vector<LayoutEntry> lay = layout(net.spec);
    const LayoutEntry& tap = lay[tap_index(lay, conv_layer)];

    std::vector<double> acc(static_cast<size_t>(tap.out_c), 0.0);
    for (int begin = 0; begin < eval_set.count(); begin += batch) {
        const int n = std::min(batch, eval_set.count() - begin);
        const Tensor b = gather_rows(eval_set, begin, n);
        const ForwardResult fwd = forward(net, b, Mode::Eval);
        check(fwd.logits.h == 1 && fwd.logits.w == 1, "network does not end in logits");

        // per-sample cross entropy gradients (no 1/n) so batching is neutral
        Tensor gl(n, fwd.logits.c, 1, 1);
        for (int i = 0; i < n; ++i) {
            const int label = eval_set.labels[begin + i];
            check(label >= 0 && label < fwd.logits.c, "label out of range");
            double mx = fwd.logits.at(i, 0, 0, 0);
            for (int j = 1; j < fwd.logits.c; ++j)
                mx = std::max(mx, static_cast<double>(fwd.logits.at(i, j, 0, 0)));
            double z = 0.0;
            for (int j = 0; j < fwd.logits.c; ++j)
                z += std::exp(fwd.logits.at(i, j, 0, 0) - mx);
            for (int j = 0; j < fwd.logits.c; ++j) {
                const double p = std::exp(fwd.logits.at(i, j, 0, 0) - mx) / z;
                gl.at(i, j, 0, 0) = static_cast<float>(p - (j == label ? 1.0 : 0.0));
            }
        }

        const NetworkGrads grads = backward(net, b, fwd, gl, true, Mode::Eval);
        const Tensor& a = fwd.activations.at(tap.name);
        const Tensor& g = grads.act_grads.at(tap.name);
        const double area = static_cast<double>(a.h) * a.w;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < a.c; ++j) {
                double s = 0.0;
                for (int y = 0; y < a.h; ++y)
                    for (int x = 0; x < a.w; ++x)
                        s += static_cast<double>(a.at(i, j, y, x)) * g.at(i, j, y, x);
                acc[j] += std::fabs(s / area);
            }
    }
    ChannelScores out;
    out.layer = conv_layer;
    out.criterion = "taylor";
    out.scores.resize(tap.out_c);
    for (int j = 0; j < tap.out_c; ++j) out.scores[j] = acc[j] / eval_set.count();
    return out;
}

std::vector<int> rank_channels(const ChannelScores& scores, double keep_ratio) {
    const int c = static_cast<int>(scores.scores.size());
    check(c >= 1, "no channels to rank");
    check(keep_ratio > 0.0 && keep_ratio <= 1.0, "keep_ratio must be in (0, 1]");
    for (int j = 0; j < c; ++j)
        check(std::isfinite(scores.scores[j]),
              "non-finite score for channel " + std::to_string(j) + " of '" +
                  scores.layer + "'");
    int k = static_cast<int>(std::lround(keep_ratio * c));
    k = std::clamp(k, 1, c);
    std::vector<int> idx(static_cast<size_t>(c));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (scores.scores[a] != scores.scores[b]) return scores.scores[a] > scores.scores[b];
        return a < b;
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

void write_stats_csv(const ChannelStats& stats, const std::string& path) {
    std::ofstream f(path);
    check(f.good(), "cannot write " + path);
    f << "layer,tap,row,channel,value\n";
    char buf[64];
    for (int r = 0; r < stats.rows; ++r)
        for (int j = 0; j < stats.channels; ++j) {
            std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(stats.at(r, j)));
            f << stats.layer << ',' << stats.tap << ',' << r << ',' << j << ',' << buf
              << '\n';
        }
    check(f.good(), "write failed for " + path);
}

ChannelStats read_stats_csv(const std::string& path) {
    std::ifstream f(path);
    check(f.good(), "cannot read " + path);
    std::string line;
    check(static_cast<bool>(std::getline(f, line)), "empty stats file " + path);
    check(line == "layer,tap,row,channel,value", "bad stats header in " + path);

    ChannelStats st;
    std::vector<std::pair<std::pair<int, int>, float>> cells;
    int max_row = -1, max_ch = -1;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string layer, tap, rs, cs, vs;
        check(std::getline(ss, layer, ',') && std::getline(ss, tap, ',') &&
                  std::getline(ss, rs, ',') && std::getline(ss, cs, ',') &&
                  std::getline(ss, vs),
              "bad stats row in " + path + ": " + line);
        if (st.layer.empty()) {
            st.layer = layer;
            st.tap = tap;
        } else {
            check(layer == st.layer && tap == st.tap,
                  "mixed layers in stats file " + path);
        }
        size_t pos = 0;
        const int r = std::stoi(rs, &pos);
        check(pos == rs.size() && r >= 0, "bad row index in " + path);
        const int cch = std::stoi(cs, &pos);
        check(pos == cs.size() && cch >= 0, "bad channel index in " + path);
        const float v = std::stof(vs, &pos);
        check(pos == vs.size(), "bad value in " + path);
        cells.push_back({{r, cch}, v});
        max_row = std::max(max_row, r);
        max_ch = std::max(max_ch, cch);
    }
    check(!cells.empty(), "no data rows in " + path);
    st.rows = max_row + 1;
    st.channels = max_ch + 1;
    check(cells.size() == static_cast<size_t>(st.rows) * st.channels,
          "stats file " + path + " is not a complete grid");
    st.m.assign(cells.size(), 0.0f);
    std::vector<bool> seen(cells.size(), false);
    for (const auto& cell : cells) {
        const size_t at =
            static_cast<size_t>(cell.first.first) * st.channels + cell.first.second;
        check(!seen[at], "duplicate cell in " + path);
        seen[at] = true;
        st.m[at] = cell.second;
    }
    return st;
}

std::string scores_csv(const ChannelScores& scores) {
    std::string out = "layer,criterion,channel,value\n";
    char buf[64];
    for (size_t j = 0; j < scores.scores.size(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", scores.scores[j]);
        out += scores.layer + ',' + scores.criterion + ',' + std::to_string(j) + ',' +
               buf + '\n';
    }
    return out;
}

} // namespace prunekit
