#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "prunekit/tensor.hpp"

using namespace prunekit;

TEST_CASE("tensor layout is row major in (n, c, h, w)") {
    Tensor t(2, 3, 4, 5);
    CHECK(t.data.size() == 2u * 3 * 4 * 5);
    for (float v : t.data) CHECK(v == 0.0f);

    t.at(1, 2, 3, 4) = 7.0f;
    CHECK(t.data[((1 * 3 + 2) * 4 + 3) * 5 + 4] == 7.0f);
    t.at(0, 0, 0, 1) = 3.0f;
    CHECK(t.data[1] == 3.0f);
}

TEST_CASE("tensor shape helpers") {
    Tensor a(1, 2, 3, 4), b(1, 2, 3, 4), c(2, 2, 3, 4);
    CHECK(a.same_shape(b));
    CHECK(!a.same_shape(c));
    CHECK(a.shape_str() == "(1,2,3,4)");
}

TEST_CASE("conv weights layout is (out, in, ky, kx)") {
    ConvWeights w(4, 3, 2);
    CHECK(w.filters.size() == 4u * 3 * 2 * 2);
    CHECK(w.bias.size() == 4u);
    w.at(3, 2, 1, 0) = 5.0f;
    CHECK(w.filters[((3 * 3 + 2) * 2 + 1) * 2 + 0] == 5.0f);
}

TEST_CASE("fc weights layout is (out, in)") {
    FcWeights w(3, 5);
    w.at(2, 4) = 9.0f;
    CHECK(w.weights[2 * 5 + 4] == 9.0f);
    CHECK(w.bias.size() == 3u);
}

TEST_CASE("batchnorm params start as identity") {
    BatchNormParams p(3);
    CHECK(p.channels == 3);
    CHECK(p.epsilon == 1e-5f);
    for (int j = 0; j < 3; ++j) {
        CHECK(p.scale[j] == 1.0f);
        CHECK(p.shift[j] == 0.0f);
        CHECK(p.running_mean[j] == 0.0f);
        CHECK(p.running_var[j] == 1.0f);
    }
}

TEST_CASE("check throws with the given message") {
    CHECK_NOTHROW(check(true, "fine"));
    CHECK_THROWS_WITH_AS(check(false, "bad thing"), "bad thing", std::runtime_error);
    CHECK_THROWS_AS(fail("boom"), std::runtime_error);
}
