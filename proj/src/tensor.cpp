#include "prunekit/tensor.hpp"

namespace prunekit {

Tensor::Tensor(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {
    check(n > 0 && c > 0 && h > 0 && w > 0,
          "tensor dims must be positive, got " + shape_str());
    data.assign(static_cast<std::size_t>(n) * c * h * w, 0.0f);
}

std::string Tensor::shape_str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
}

ConvWeights::ConvWeights(int d, int c, int k) : out_channels(d), in_channels(c), kernel(k) {
    check(d > 0 && c > 0 && k > 0, "conv weight dims must be positive");
    filters.assign(static_cast<std::size_t>(d) * c * k * k, 0.0f);
    bias.assign(static_cast<std::size_t>(d), 0.0f);
}

FcWeights::FcWeights(int out, int in) : out_units(out), in_units(in) {
    check(out > 0 && in > 0, "fc weight dims must be positive");
    weights.assign(static_cast<std::size_t>(out) * in, 0.0f);
    bias.assign(static_cast<std::size_t>(out), 0.0f);
}

BatchNormParams::BatchNormParams(int c, float eps) : channels(c), epsilon(eps) {
    check(c > 0, "batchnorm channel count must be positive");
    scale.assign(c, 1.0f);
    shift.assign(c, 0.0f);
    running_mean.assign(c, 0.0f);
    running_var.assign(c, 1.0f);
}

void fail(const std::string& msg) { throw std::runtime_error(msg); }

void check(bool ok, const std::string& msg) {
    if (!ok) fail(msg);
}

} // namespace prunekit
