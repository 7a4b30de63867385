#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "prunekit/network.hpp"
#include "prunekit/presets.hpp"
#include "prunekit/serialize.hpp"

using namespace prunekit;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("tmp_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Network scrambled_smallres() {
    Network net = init_network(smallres_spec(4), 33);
    std::mt19937 g(91);
    std::uniform_real_distribution<float> d(-0.5f, 0.5f);
    for (auto& [name, p] : net.bn) {
        for (int i = 0; i < p.channels; ++i) {
            p.running_mean[i] = d(g);
            p.running_var[i] = 1.0f + std::fabs(d(g));
            p.scale[i] = 1.0f + d(g);
            p.shift[i] = d(g);
        }
    }
    for (auto& [name, w] : net.conv)
        for (float& b : w.bias) b = d(g);
    return net;
}

} // namespace

TEST_CASE("crc32 known vectors") {
    const unsigned char check[] = "123456789";
    CHECK(crc32(check, 9) == 0xCBF43926u);
    CHECK(crc32(check, 0) == 0u);
}

TEST_CASE("smallnet round trip preserves every parameter") {
    Network net = init_network(smallnet_spec(5), 7);
    net.conv.at("conv1").bias[3] = -0.25f;
    net.fc.at("fc").weights[10] = 1.5f;

    TempFile f("roundtrip_smallnet.pkm");
    save_model(net, f.path);
    Network back = load_model(f.path);

    CHECK(back.spec.input_c == 3);
    CHECK(back.spec.input_h == 12);
    CHECK(back.spec.units.size() == net.spec.units.size());
    CHECK(back.conv.at("conv1").filters == net.conv.at("conv1").filters);
    CHECK(back.conv.at("conv1").bias == net.conv.at("conv1").bias);
    CHECK(back.conv.at("conv2").filters == net.conv.at("conv2").filters);
    CHECK(back.fc.at("fc").weights == net.fc.at("fc").weights);
    CHECK(back.fc.at("fc").bias == net.fc.at("fc").bias);

    std::mt19937 g(3);
    const Tensor x = rand_tensor(g, 2, 3, 12, 12);
    ForwardResult a = forward(net, x, Mode::Eval);
    ForwardResult b = forward(back, x, Mode::Eval);
    CHECK(a.logits.data == b.logits.data);
}

TEST_CASE("residual round trip keeps batchnorm state") {
    Network net = scrambled_smallres();
    TempFile f("roundtrip_smallres.pkm");
    save_model(net, f.path);
    Network back = load_model(f.path);

    for (const auto& [name, p] : net.bn) {
        const BatchNormParams& q = back.bn.at(name);
        CHECK(q.scale == p.scale);
        CHECK(q.shift == p.shift);
        CHECK(q.running_mean == p.running_mean);
        CHECK(q.running_var == p.running_var);
        CHECK(q.epsilon == p.epsilon);
    }
    const auto lay = layout(back.spec);
    const LayoutEntry* add = find_entry(lay, "block3");
    REQUIRE(add != nullptr);
    CHECK(add->kind == LayerKind::Add);
}

TEST_CASE("saving a loaded model reproduces the file byte for byte") {
    Network net = scrambled_smallres();
    TempFile a("save_a.pkm"), b("save_b.pkm");
    save_model(net, a.path);
    Network back = load_model(a.path);
    save_model(back, b.path);
    CHECK(slurp(a.path) == slurp(b.path));
}

TEST_CASE("special float values survive the blob") {
    Network net = init_network(smallnet_spec(3, 1, 6, 6), 2);
    ConvWeights& w = net.conv.at("conv1");
    w.filters[0] = 0.0f;
    w.filters[1] = -0.0f;
    w.filters[2] = std::numeric_limits<float>::denorm_min();
    w.filters[3] = std::numeric_limits<float>::max();
    w.filters[4] = 1.0f / 3.0f;
    TempFile f("special.pkm");
    save_model(net, f.path);
    Network back = load_model(f.path);
    const std::vector<float>& r = back.conv.at("conv1").filters;
    CHECK(std::memcmp(r.data(), w.filters.data(), w.filters.size() * 4) == 0);
}

TEST_CASE("corrupted payload is rejected") {
    Network net = init_network(smallnet_spec(3), 11);
    TempFile f("tampered.pkm");
    save_model(net, f.path);
    std::string bytes = slurp(f.path);

    SUBCASE("flipped blob byte") {
        bytes[bytes.size() - 5] = static_cast<char>(bytes[bytes.size() - 5] ^ 0x40);
        spit(f.path, bytes);
        CHECK_THROWS_WITH_AS(load_model(f.path), doctest::Contains("checksum"),
                             std::runtime_error);
    }
    SUBCASE("truncated blob") {
        spit(f.path, bytes.substr(0, bytes.size() - 8));
        CHECK_THROWS_WITH_AS(load_model(f.path), doctest::Contains("truncated"),
                             std::runtime_error);
    }
    SUBCASE("trailing garbage") {
        spit(f.path, bytes + "extra");
        CHECK_THROWS_WITH_AS(load_model(f.path), doctest::Contains("trailing"),
                             std::runtime_error);
    }
    SUBCASE("bad header") {
        spit(f.path, "model v9\n" + bytes);
        CHECK_THROWS_WITH_AS(load_model(f.path), doctest::Contains("bad header"),
                             std::runtime_error);
    }
    SUBCASE("unknown manifest line") {
        const auto at = bytes.find("layer name=conv1");
        REQUIRE(at != std::string::npos);
        bytes.replace(at, 5, "layup");
        spit(f.path, bytes);
        CHECK_THROWS_WITH_AS(load_model(f.path), doctest::Contains("unrecognized"),
                             std::runtime_error);
    }
    SUBCASE("parameter count mismatch") {
        const auto at = bytes.find("count=216"); // conv1 filters: 8*3*3*3
        REQUIRE(at != std::string::npos);
        bytes.replace(at, 9, "count=215");
        spit(f.path, bytes);
        CHECK_THROWS(load_model(f.path));
    }
    SUBCASE("missing file") {
        CHECK_THROWS_WITH_AS(load_model("no_such_model.pkm"), doctest::Contains("cannot open"),
                             std::runtime_error);
    }
}
