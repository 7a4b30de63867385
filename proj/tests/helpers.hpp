#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "prunekit/rng.hpp"
#include "prunekit/tensor.hpp"

namespace prunekit {

inline Tensor rand_tensor(std::mt19937& g, int n, int c, int h, int w, float lo = -1.0f,
                          float hi = 1.0f) {
    Tensor t(n, c, h, w);
    for (float& v : t.data) v = uniform_float(g, lo, hi);
    return t;
}

// shuffled ladder: pairwise gaps of 0.1 and nothing within 0.05 of zero, so
// finite differences never cross a relu kink or flip a pooling argmax
inline Tensor ladder_tensor(std::mt19937& g, int n, int c, int h, int w) {
    Tensor t(n, c, h, w);
    const size_t size = t.data.size();
    std::vector<float> vals(size);
    for (size_t i = 0; i < size; ++i)
        vals[i] = 0.1f * static_cast<float>(i) - 0.05f * static_cast<float>(size) + 0.05f;
    shuffle_vec(vals, g);
    std::copy(vals.begin(), vals.end(), t.data.begin());
    return t;
}

inline double rel_err(double a, double b) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1.0});
}

// scalar probe for gradient checks: S = sum(out * g)
inline double loss_proxy(const Tensor& out, const Tensor& g) {
    double s = 0.0;
    for (size_t i = 0; i < out.data.size(); ++i)
        s += static_cast<double>(out.data[i]) * g.data[i];
    return s;
}

// central finite differences of eval() against the analytic gradient, checked
// component by component
template <class F>
double fd_max_rel_err(std::vector<float>& params, std::span<const float> analytic, F eval,
                      double eps = 1e-3) {
    double worst = 0.0;
    for (size_t i = 0; i < params.size(); ++i) {
        const float keep = params[i];
        params[i] = static_cast<float>(keep + eps);
        const double sp = eval();
        params[i] = static_cast<float>(keep - eps);
        const double sm = eval();
        params[i] = keep;
        const double fd = (sp - sm) / (2.0 * eps);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    return worst;
}

} // namespace prunekit
