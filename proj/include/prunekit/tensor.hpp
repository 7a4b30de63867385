#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace prunekit {

// 4-d batch tensor, row-major n,c,h,w, 32-bit float storage.
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<float> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_);

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }

    float& at(int i, int j, int y, int x) {
        return data[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x];
    }
    float at(int i, int j, int y, int x) const {
        return data[((static_cast<std::size_t>(i) * c + j) * h + y) * w + x];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    std::string shape_str() const;
};

// conv filter bank: out_channels filters of in_channels x kernel x kernel, plus one bias per filter
struct ConvWeights {
    int out_channels = 0, in_channels = 0, kernel = 0;
    std::vector<float> filters;
    std::vector<float> bias;

    ConvWeights() = default;
    ConvWeights(int d, int c, int k);

    float& at(int o, int i, int y, int x) {
        return filters[((static_cast<std::size_t>(o) * in_channels + i) * kernel + y) * kernel + x];
    }
    float at(int o, int i, int y, int x) const {
        return filters[((static_cast<std::size_t>(o) * in_channels + i) * kernel + y) * kernel + x];
    }
};

// fully connected: weights[out][in] row-major, one bias per output unit
struct FcWeights {
    int out_units = 0, in_units = 0;
    std::vector<float> weights;
    std::vector<float> bias;

    FcWeights() = default;
    FcWeights(int out, int in);

    float& at(int o, int i) { return weights[static_cast<std::size_t>(o) * in_units + i]; }
    float at(int o, int i) const { return weights[static_cast<std::size_t>(o) * in_units + i]; }
};

struct BatchNormParams {
    int channels = 0;
    float epsilon = 1e-5f;
    std::vector<float> scale;
    std::vector<float> shift;
    std::vector<float> running_mean;
    std::vector<float> running_var;

    BatchNormParams() = default;
    explicit BatchNormParams(int c, float eps = 1e-5f);
};

[[noreturn]] void fail(const std::string& msg);

void check(bool ok, const std::string& msg);

} // namespace prunekit
