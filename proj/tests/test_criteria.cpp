#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include "helpers.hpp"
#include "prunekit/criteria.hpp"
#include "prunekit/presets.hpp"
#include "prunekit/train.hpp"

using namespace prunekit;

namespace {

LayerSpec conv(const std::string& name, int d, int k = 3, int pad = 1) {
    LayerSpec l;
    l.name = name;
    l.kind = LayerKind::Conv;
    l.out_channels = d;
    l.kernel = k;
    l.pad = pad;
    return l;
}

LayerSpec unit(const std::string& name, LayerKind kind) {
    LayerSpec l;
    l.name = name;
    l.kind = kind;
    if (kind == LayerKind::MaxPool) {
        l.window = 2;
        l.pool_stride = 2;
    }
    return l;
}

// same binning contract, but counts via a map and uses the identity
// H = ln n - (1/n) * sum(c * ln c) in long double
std::vector<double> entropy_oracle(const ChannelStats& st, int bins) {
    std::vector<double> out(st.channels);
    for (int j = 0; j < st.channels; ++j) {
        double lo = st.at(0, j), hi = lo;
        for (int r = 1; r < st.rows; ++r) {
            lo = std::min(lo, static_cast<double>(st.at(r, j)));
            hi = std::max(hi, static_cast<double>(st.at(r, j)));
        }
        if (!(hi > lo)) {
            out[j] = 0.0;
            continue;
        }
        std::map<int, long long> counts;
        for (int r = 0; r < st.rows; ++r) {
            int idx = static_cast<int>((st.at(r, j) - lo) / (hi - lo) * bins);
            ++counts[std::clamp(idx, 0, bins - 1)];
        }
        long double s = 0.0L;
        for (const auto& [bin, c] : counts)
            s += static_cast<long double>(c) * std::log(static_cast<long double>(c));
        out[j] = static_cast<double>(std::log(static_cast<long double>(st.rows)) -
                                     s / st.rows);
    }
    return out;
}

ChannelStats stats_matrix(int rows, int channels, std::uint32_t seed) {
    ChannelStats st;
    st.layer = "conv1";
    st.tap = "relu1";
    st.rows = rows;
    st.channels = channels;
    st.m.assign(static_cast<size_t>(rows) * channels, 0.0f);
    std::mt19937 g(seed);
    std::uniform_real_distribution<float> d(-2.0f, 3.0f);
    for (float& v : st.m) v = d(g);
    return st;
}

// push interior cells away from bin edges so float affine transforms cannot
// move a sample across a boundary
void make_margin_safe(ChannelStats& st, int bins, std::uint32_t seed) {
    std::mt19937 g(seed);
    std::uniform_real_distribution<double> u(0.02, 0.98);
    for (int j = 0; j < st.channels; ++j) {
        float lo = st.at(0, j), hi = lo;
        for (int r = 1; r < st.rows; ++r) {
            lo = std::min(lo, st.at(r, j));
            hi = std::max(hi, st.at(r, j));
        }
        if (!(hi > lo)) continue;
        for (int r = 0; r < st.rows; ++r) {
            float& v = st.at(r, j);
            if (v == lo || v == hi) continue;
            for (;;) {
                const double rel = (v - lo) / (static_cast<double>(hi) - lo) * bins;
                if (std::fabs(rel - std::lround(rel)) >= 1e-3) break;
                v = static_cast<float>(lo + (static_cast<double>(hi) - lo) * u(g));
            }
        }
    }
}

// 1x2x2 input, one k=1 conv with hand weights, relu tap
Network tiny_stats_net() {
    NetworkSpec s;
    s.input_c = 1;
    s.input_h = 2;
    s.input_w = 2;
    s.units = {conv("c", 2, 1, 0), unit("r", LayerKind::Relu)};
    validate_spec(s);
    Network net = init_network(s, 1);
    ConvWeights& w = net.conv.at("c");
    w.at(0, 0, 0, 0) = 2.0f;
    w.at(1, 0, 0, 0) = -1.0f;
    w.bias = {0.5f, 0.0f};
    return net;
}

Dataset tiny_stats_data() {
    Dataset ds;
    ds.classes = 2;
    ds.images = Tensor(2, 1, 2, 2);
    ds.labels = {0, 1};
    const float img0[4] = {1, 2, 3, 4};
    const float img1[4] = {-1, 0, 1, 2};
    std::copy_n(img0, 4, ds.images.data.begin());
    std::copy_n(img1, 4, ds.images.data.begin() + 4);
    return ds;
}

} // namespace

TEST_CASE("entropy matches an independent oracle") {
    for (const auto& [rows, channels, bins, seed] :
         {std::tuple{40, 6, 100, 1u}, std::tuple{200, 3, 7, 2u}, std::tuple{17, 9, 2, 3u},
          std::tuple{512, 4, 64, 4u}}) {
        const ChannelStats st = stats_matrix(rows, channels, seed);
        EntropyConfig cfg;
        cfg.bins = bins;
        const ChannelScores got = entropy_score(st, cfg);
        const std::vector<double> want = entropy_oracle(st, bins);
        REQUIRE(got.scores.size() == want.size());
        for (size_t j = 0; j < want.size(); ++j)
            CHECK(std::fabs(got.scores[j] - want[j]) < 1e-9);
        CHECK(got.criterion == "entropy");
        CHECK(got.layer == "conv1");
    }
}

TEST_CASE("entropy hand values") {
    ChannelStats st;
    st.layer = "c";
    st.tap = "c";
    st.rows = 4;
    st.channels = 3;
    // col 0 constant; col 1 split in two; col 2 spread across four bins
    st.m = {2.0f, 0.0f, 0.00f, //
            2.0f, 0.0f, 0.25f, //
            2.0f, 1.0f, 0.50f, //
            2.0f, 1.0f, 1.00f};
    EntropyConfig cfg;
    cfg.bins = 4;
    const ChannelScores s = entropy_score(st, cfg);
    CHECK(s.scores[0] == 0.0);
    CHECK(s.scores[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(s.scores[2] == doctest::Approx(std::log(4.0)).epsilon(1e-12));

    // the two-level column scores ln 2 for any bin count
    cfg.bins = 100;
    CHECK(entropy_score(st, cfg).scores[1] == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("entropy bounds and degenerate shapes") {
    const ChannelStats st = stats_matrix(300, 5, 9);
    EntropyConfig cfg;
    cfg.bins = 50;
    for (double v : entropy_score(st, cfg).scores) {
        CHECK(v >= 0.0);
        CHECK(v <= std::log(50.0) + 1e-12);
    }

    ChannelStats one;
    one.layer = "c";
    one.tap = "c";
    one.rows = 1;
    one.channels = 3;
    one.m = {0.4f, -2.0f, 7.0f};
    for (double v : entropy_score(one, cfg).scores) CHECK(v == 0.0);

    CHECK_THROWS(entropy_score(one, EntropyConfig{1}));
    ChannelStats empty;
    CHECK_THROWS(entropy_score(empty, cfg));
}

TEST_CASE("entropy ignores affine rescaling") {
    for (const auto& [a, b] : {std::pair{1.75f, 0.6f}, std::pair{-2.0f, 1.0f}}) {
        ChannelStats st = stats_matrix(160, 4, 21);
        make_margin_safe(st, 40, 22);
        ChannelStats scaled = st;
        for (float& v : scaled.m) v = a * v + b;
        EntropyConfig cfg;
        cfg.bins = 40;
        const ChannelScores base = entropy_score(st, cfg);
        const ChannelScores moved = entropy_score(scaled, cfg);
        for (size_t j = 0; j < base.scores.size(); ++j)
            CHECK(std::fabs(base.scores[j] - moved.scores[j]) < 1e-12);
    }
}

TEST_CASE("activation tap resolution") {
    CHECK(activation_tap(smallnet_spec(5), "conv1") == "relu1");
    CHECK(activation_tap(smallnet_spec(5), "conv2") == "relu2");

    const NetworkSpec res = smallres_spec(4);
    CHECK(activation_tap(res, "stem") == "stem_relu");
    CHECK(activation_tap(res, "block1.conv1") == "block1.relu1");
    CHECK(activation_tap(res, "block2.conv2") == "block2.relu2");
    CHECK(activation_tap(res, "block1.conv3") == "block1.bn3"); // add is not a tap

    NetworkSpec s;
    s.input_c = 1;
    s.input_h = 4;
    s.input_w = 4;
    LayerSpec bn = unit("b", LayerKind::BatchNorm);
    SUBCASE("conv then batchnorm then relu") {
        s.units = {conv("c", 2), bn, unit("r", LayerKind::Relu)};
        CHECK(activation_tap(s, "c") == "r");
    }
    SUBCASE("conv then batchnorm then pool") {
        s.units = {conv("c", 2), bn, unit("p", LayerKind::MaxPool)};
        CHECK(activation_tap(s, "c") == "b");
    }
    SUBCASE("bare conv") {
        s.units = {conv("c", 2), unit("p", LayerKind::MaxPool)};
        CHECK(activation_tap(s, "c") == "c");
    }
    SUBCASE("block without batchnorm") {
        ResidualBlockSpec blk;
        blk.name = "blk";
        blk.stage1_channels = 2;
        blk.stage2_channels = 2;
        blk.batchnorm = false;
        s.units = {conv("c", 4), unit("r", LayerKind::Relu), blk};
        CHECK(activation_tap(s, "blk.conv2") == "blk.relu2");
        CHECK(activation_tap(s, "blk.conv3") == "blk.conv3");
    }
    SUBCASE("not a conv") {
        CHECK_THROWS_WITH_AS(activation_tap(smallnet_spec(5), "relu1"),
                             doctest::Contains("not a conv"), std::runtime_error);
        CHECK_THROWS_WITH_AS(activation_tap(smallnet_spec(5), "missing"),
                             doctest::Contains("no unit named"), std::runtime_error);
    }
}

TEST_CASE("collect_stats hand values") {
    Network net = tiny_stats_net();
    const Dataset ds = tiny_stats_data();
    const ChannelStats st = collect_stats(net, ds, "c", 32);
    CHECK(st.layer == "c");
    CHECK(st.tap == "r");
    CHECK(st.rows == 2);
    CHECK(st.channels == 2);
    // ch0 = relu(2x + 0.5), ch1 = relu(-x), spatial means
    CHECK(st.at(0, 0) == 5.5f);
    CHECK(st.at(0, 1) == 0.0f);
    CHECK(st.at(1, 0) == 1.875f);
    CHECK(st.at(1, 1) == 0.25f);
}

TEST_CASE("collect_stats is batch size independent") {
    Network net = init_network(smallnet_spec(3), 6);
    const Dataset ds = synth_dataset(3, 11, 3, 12, 12, 8);
    const ChannelStats a = collect_stats(net, ds, "conv1", 64);
    const ChannelStats b = collect_stats(net, ds, "conv1", 5);
    const ChannelStats c = collect_stats(net, ds, "conv1", 1);
    CHECK(a.m == b.m);
    CHECK(a.m == c.m);
    CHECK(a.rows == 33);
    CHECK(a.channels == 8);
}

TEST_CASE("stats csv round trip") {
    Network net = init_network(smallnet_spec(3), 16);
    const Dataset ds = synth_dataset(3, 4, 3, 12, 12, 9);
    const ChannelStats st = collect_stats(net, ds, "conv2", 8);

    const std::string path = "tmp_stats.csv";
    write_stats_csv(st, path);
    const ChannelStats back = read_stats_csv(path);
    CHECK(back.layer == st.layer);
    CHECK(back.tap == st.tap);
    CHECK(back.rows == st.rows);
    CHECK(back.channels == st.channels);
    CHECK(back.m == st.m);

    // scores computed from the file match scores computed in memory
    const ChannelScores a = entropy_score(st);
    const ChannelScores b = entropy_score(back);
    CHECK(a.scores == b.scores);
    std::remove(path.c_str());
}

TEST_CASE("stats csv rejects malformed files") {
    const std::string path = "tmp_bad_stats.csv";
    auto put = [&](const std::string& body) {
        std::ofstream f(path);
        f << body;
    };

    SUBCASE("bad header") {
        put("row,channel,value\n0,0,1.0\n");
        CHECK_THROWS_WITH_AS(read_stats_csv(path), doctest::Contains("bad stats header"),
                             std::runtime_error);
    }
    SUBCASE("incomplete grid") {
        put("layer,tap,row,channel,value\nc,r,0,0,1.0\nc,r,1,1,2.0\nc,r,0,1,3.0\n");
        CHECK_THROWS_WITH_AS(read_stats_csv(path), doctest::Contains("complete grid"),
                             std::runtime_error);
    }
    SUBCASE("duplicate cell") {
        // count matches the 2x2 grid, but (0,1) appears twice and (1,1) never
        put("layer,tap,row,channel,value\nc,r,0,0,1.0\nc,r,0,1,2.0\nc,r,1,0,3.0\n"
            "c,r,0,1,4.0\n");
        CHECK_THROWS_WITH_AS(read_stats_csv(path), doctest::Contains("duplicate"),
                             std::runtime_error);
    }
    SUBCASE("mixed layers") {
        put("layer,tap,row,channel,value\nc,r,0,0,1.0\nother,r,0,1,2.0\n");
        CHECK_THROWS_WITH_AS(read_stats_csv(path), doctest::Contains("mixed"),
                             std::runtime_error);
    }
    SUBCASE("bad number") {
        put("layer,tap,row,channel,value\nc,r,0,zero,1.0\n");
        CHECK_THROWS(read_stats_csv(path));
    }
    SUBCASE("empty") {
        put("");
        CHECK_THROWS(read_stats_csv(path));
    }
    std::remove(path.c_str());
}

TEST_CASE("apoz hand values") {
    Network net = tiny_stats_net();
    const Dataset ds = tiny_stats_data();
    const ChannelScores s = apoz_score(net, ds, "c", 32);
    CHECK(s.criterion == "apoz");
    REQUIRE(s.scores.size() == 2);
    // ch0 zero at 1 of 8 positions, ch1 zero at 7 of 8
    CHECK(s.scores[0] == doctest::Approx(0.875).epsilon(1e-12));
    CHECK(s.scores[1] == doctest::Approx(0.125).epsilon(1e-12));

    // batch size must not matter
    const ChannelScores s1 = apoz_score(net, ds, "c", 1);
    CHECK(s.scores == s1.scores);
}

TEST_CASE("apoz requires a relu tap") {
    NetworkSpec s;
    s.input_c = 1;
    s.input_h = 4;
    s.input_w = 4;
    s.units = {conv("c", 2), unit("p", LayerKind::MaxPool)};
    Network net = init_network(s, 1);
    Dataset ds;
    ds.classes = 2;
    ds.images = Tensor(1, 1, 4, 4);
    ds.labels = {0};
    CHECK_THROWS_WITH_AS(apoz_score(net, ds, "c", 8), doctest::Contains("relu"),
                         std::runtime_error);
}

TEST_CASE("weight sum ignores bias") {
    Network net = tiny_stats_net();
    net.conv.at("c").bias = {100.0f, -100.0f};
    const ChannelScores s = weight_sum_score(net, "c");
    CHECK(s.criterion == "weight_sum");
    CHECK(s.scores[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(s.scores[1] == doctest::Approx(1.0).epsilon(1e-12));

    Network sn = init_network(smallnet_spec(3), 5);
    ConvWeights& w = sn.conv.at("conv2");
    const ChannelScores cs = weight_sum_score(sn, "conv2");
    double manual = 0.0;
    for (int i = 0; i < w.in_channels * w.kernel * w.kernel; ++i)
        manual += std::fabs(w.filters[i]);
    CHECK(cs.scores[0] == doctest::Approx(manual).epsilon(1e-12));

    CHECK_THROWS(weight_sum_score(sn, "fc"));
    CHECK_THROWS(weight_sum_score(sn, "missing"));
}

TEST_CASE("taylor is batch size independent") {
    Network net = init_network(smallnet_spec(3), 12);
    const Dataset ds = synth_dataset(3, 9, 3, 12, 12, 3);
    const ChannelScores a = taylor_score(net, ds, "conv1", 27);
    const ChannelScores b = taylor_score(net, ds, "conv1", 4);
    const ChannelScores c = taylor_score(net, ds, "conv1", 1);
    CHECK(a.criterion == "taylor");
    REQUIRE(a.scores.size() == 8);
    for (size_t j = 0; j < a.scores.size(); ++j) {
        CHECK(a.scores[j] == doctest::Approx(b.scores[j]).epsilon(1e-12));
        CHECK(a.scores[j] == doctest::Approx(c.scores[j]).epsilon(1e-12));
    }
}

TEST_CASE("taylor scores a dead channel zero") {
    Network net = init_network(smallnet_spec(3), 14);
    zero_filters(net, {{"conv1", {2, 5}}});
    const Dataset ds = synth_dataset(3, 6, 3, 12, 12, 5);
    const ChannelScores s = taylor_score(net, ds, "conv1", 8);
    CHECK(s.scores[2] == 0.0);
    CHECK(s.scores[5] == 0.0);
    double live = 0.0;
    for (double v : s.scores) live += v;
    CHECK(live > 0.0);
}

TEST_CASE("scoring never touches batchnorm state") {
    Network net = init_network(smallres_spec(3), 8);
    const Dataset ds = synth_dataset(3, 5, 3, 12, 12, 6);
    std::map<std::string, std::vector<float>> means, vars;
    for (const auto& [name, p] : net.bn) {
        means[name] = p.running_mean;
        vars[name] = p.running_var;
    }
    (void)taylor_score(net, ds, "block1.conv2", 4);
    (void)apoz_score(net, ds, "block2.conv2", 4);
    (void)collect_stats(net, ds, "block3.conv2", 4);
    for (const auto& [name, p] : net.bn) {
        CHECK(p.running_mean == means[name]);
        CHECK(p.running_var == vars[name]);
    }
}

TEST_CASE("rank_channels picks the top fraction") {
    ChannelScores s;
    s.layer = "c";
    s.criterion = "entropy";
    s.scores = {5, 1, 3, 2, 4};
    CHECK(rank_channels(s, 0.6) == std::vector<int>{0, 2, 4});
    CHECK(rank_channels(s, 1.0) == std::vector<int>{0, 1, 2, 3, 4});
    CHECK(rank_channels(s, 0.2) == std::vector<int>{0});
    CHECK(rank_channels(s, 0.05) == std::vector<int>{0}); // floor of one channel

    // lround on the channel count
    ChannelScores eight;
    eight.scores = {8, 7, 6, 5, 4, 3, 2, 1};
    CHECK(rank_channels(eight, 0.5).size() == 4);
    CHECK(rank_channels(eight, 0.3).size() == 2); // lround(2.4)
    CHECK(rank_channels(eight, 0.7).size() == 6); // lround(5.6)
}

TEST_CASE("rank_channels breaks ties toward smaller indices") {
    ChannelScores s;
    s.scores = {1, 2, 2, 2};
    CHECK(rank_channels(s, 0.5) == std::vector<int>{1, 2});
    s.scores = {3, 3, 3, 3};
    CHECK(rank_channels(s, 0.5) == std::vector<int>{0, 1});

    // a constant shift cannot change the keep set
    ChannelScores shifted;
    shifted.scores = {0.4, 0.1, 0.9, 0.3, 0.7, 0.2};
    const auto base = rank_channels(shifted, 0.5);
    for (double& v : shifted.scores) v += 17.0;
    CHECK(rank_channels(shifted, 0.5) == base);
}

TEST_CASE("rank_channels validation") {
    ChannelScores s;
    s.scores = {1, 2, 3};
    CHECK_THROWS(rank_channels(s, 0.0));
    CHECK_THROWS(rank_channels(s, 1.5));
    s.scores[1] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(rank_channels(s, 0.5), doctest::Contains("non-finite"),
                         std::runtime_error);
    s.scores.clear();
    CHECK_THROWS(rank_channels(s, 0.5));
}

TEST_CASE("scores csv format") {
    ChannelScores s;
    s.layer = "conv1";
    s.criterion = "entropy";
    s.scores = {0.5, 1.25};
    const std::string csv = scores_csv(s);
    CHECK(csv == "layer,criterion,channel,value\nconv1,entropy,0,0.5\nconv1,entropy,1,1.25\n");
}
