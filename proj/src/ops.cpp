#include "prunekit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace prunekit {

namespace {

int conv_extent(int in, int pad, int kernel, int stride) {
    return (in + 2 * pad - kernel) / stride + 1;
}

void check_conv_args(const Tensor& input, const ConvWeights& w, int stride, int pad) {
    check(stride >= 1, "conv stride must be >= 1");
    check(pad >= 0, "conv pad must be >= 0");
    check(w.in_channels == input.c,
          "conv expects " + std::to_string(w.in_channels) + " input channels, got " +
              std::to_string(input.c));
    check(input.h + 2 * pad >= w.kernel && input.w + 2 * pad >= w.kernel,
          "conv kernel " + std::to_string(w.kernel) + " exceeds padded input " +
              input.shape_str());
}

void check_pool_args(const Tensor& input, int window, int stride) {
    check(window >= 1 && stride >= 1, "maxpool window and stride must be >= 1");
    check(input.h >= window && input.w >= window,
          "maxpool window " + std::to_string(window) + " exceeds input " + input.shape_str());
}

} // namespace

Tensor conv2d_forward(const Tensor& input, const ConvWeights& w, int stride, int pad) {
    check_conv_args(input, w, stride, pad);
    const int oh = conv_extent(input.h, pad, w.kernel, stride);
    const int ow = conv_extent(input.w, pad, w.kernel, stride);
    Tensor out(input.n, w.out_channels, oh, ow);
    const int k = w.kernel;
    for (int b = 0; b < input.n; ++b)
        for (int o = 0; o < w.out_channels; ++o)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    double acc = w.bias[o];
                    const int y0 = y * stride - pad;
                    const int x0 = x * stride - pad;
                    for (int i = 0; i < input.c; ++i)
                        for (int ky = 0; ky < k; ++ky) {
                            const int yy = y0 + ky;
                            if (yy < 0 || yy >= input.h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int xx = x0 + kx;
                                if (xx < 0 || xx >= input.w) continue;
                                acc += static_cast<double>(input.at(b, i, yy, xx)) *
                                       w.at(o, i, ky, kx);
                            }
                        }
                    out.at(b, o, y, x) = static_cast<float>(acc);
                }
    return out;
}

ConvGrads conv2d_backward(const Tensor& input, const ConvWeights& w, const Tensor& grad_out,
                          int stride, int pad) {
    check_conv_args(input, w, stride, pad);
    const int oh = conv_extent(input.h, pad, w.kernel, stride);
    const int ow = conv_extent(input.w, pad, w.kernel, stride);
    check(grad_out.n == input.n && grad_out.c == w.out_channels && grad_out.h == oh &&
              grad_out.w == ow,
          "conv grad_out shape " + grad_out.shape_str() + " does not match forward output");

    ConvGrads g;
    g.input = Tensor(input.n, input.c, input.h, input.w);
    g.weights = ConvWeights(w.out_channels, w.in_channels, w.kernel);
    const int k = w.kernel;

    std::vector<double> wacc(w.filters.size(), 0.0);
    std::vector<double> bacc(w.bias.size(), 0.0);
    std::vector<double> iacc(input.data.size(), 0.0);

    for (int b = 0; b < input.n; ++b)
        for (int o = 0; o < w.out_channels; ++o)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    const double go = grad_out.at(b, o, y, x);
                    bacc[o] += go;
                    const int y0 = y * stride - pad;
                    const int x0 = x * stride - pad;
                    for (int i = 0; i < input.c; ++i)
                        for (int ky = 0; ky < k; ++ky) {
                            const int yy = y0 + ky;
                            if (yy < 0 || yy >= input.h) continue;
                            for (int kx = 0; kx < k; ++kx) {
                                const int xx = x0 + kx;
                                if (xx < 0 || xx >= input.w) continue;
                                const std::size_t wi =
                                    ((static_cast<std::size_t>(o) * input.c + i) * k + ky) * k + kx;
                                const std::size_t ii =
                                    ((static_cast<std::size_t>(b) * input.c + i) * input.h + yy) *
                                        input.w + xx;
                                wacc[wi] += go * input.data[ii];
                                iacc[ii] += go * w.filters[wi];
                            }
                        }
                }

    for (std::size_t i = 0; i < wacc.size(); ++i) g.weights.filters[i] = static_cast<float>(wacc[i]);
    for (std::size_t i = 0; i < bacc.size(); ++i) g.weights.bias[i] = static_cast<float>(bacc[i]);
    for (std::size_t i = 0; i < iacc.size(); ++i) g.input.data[i] = static_cast<float>(iacc[i]);
    return g;
}

Tensor relu_forward(const Tensor& input) {
    Tensor out = input;
    for (float& v : out.data) v = v > 0.0f ? v : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    check(input.same_shape(grad_out), "relu grad_out shape mismatch");
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.data.size(); ++i)
        if (input.data[i] <= 0.0f) g.data[i] = 0.0f;
    return g;
}

Tensor maxpool_forward(const Tensor& input, int window, int stride) {
    check_pool_args(input, window, stride);
    const int oh = (input.h - window) / stride + 1;
    const int ow = (input.w - window) / stride + 1;
    Tensor out(input.n, input.c, oh, ow);
    for (int b = 0; b < input.n; ++b)
        for (int j = 0; j < input.c; ++j)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    float best = -std::numeric_limits<float>::infinity();
                    for (int ky = 0; ky < window; ++ky)
                        for (int kx = 0; kx < window; ++kx) {
                            const float v = input.at(b, j, y * stride + ky, x * stride + kx);
                            if (v > best) best = v;
                        }
                    out.at(b, j, y, x) = best;
                }
    return out;
}

Tensor maxpool_backward(const Tensor& input, int window, int stride, const Tensor& grad_out) {
    check_pool_args(input, window, stride);
    const int oh = (input.h - window) / stride + 1;
    const int ow = (input.w - window) / stride + 1;
    check(grad_out.n == input.n && grad_out.c == input.c && grad_out.h == oh && grad_out.w == ow,
          "maxpool grad_out shape " + grad_out.shape_str() + " does not match forward output");
    Tensor g(input.n, input.c, input.h, input.w);
    for (int b = 0; b < input.n; ++b)
        for (int j = 0; j < input.c; ++j)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    float best = -std::numeric_limits<float>::infinity();
                    int by = 0, bx = 0;
                    for (int ky = 0; ky < window; ++ky)
                        for (int kx = 0; kx < window; ++kx) {
                            const float v = input.at(b, j, y * stride + ky, x * stride + kx);
                            if (v > best) {
                                best = v;
                                by = y * stride + ky;
                                bx = x * stride + kx;
                            }
                        }
                    g.at(b, j, by, bx) += grad_out.at(b, j, y, x);
                }
    return g;
}

Tensor global_avg_pool(const Tensor& input) {
    Tensor out(input.n, input.c, 1, 1);
    const double inv = 1.0 / (static_cast<double>(input.h) * input.w);
    for (int b = 0; b < input.n; ++b)
        for (int j = 0; j < input.c; ++j) {
            double acc = 0.0;
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x) acc += input.at(b, j, y, x);
            out.at(b, j, 0, 0) = static_cast<float>(acc * inv);
        }
    return out;
}

Tensor global_avg_pool_backward(const Tensor& input, const Tensor& grad_out) {
    check(grad_out.n == input.n && grad_out.c == input.c && grad_out.h == 1 && grad_out.w == 1,
          "gap grad_out shape " + grad_out.shape_str() + " does not match forward output");
    Tensor g(input.n, input.c, input.h, input.w);
    const float inv = 1.0f / (static_cast<float>(input.h) * input.w);
    for (int b = 0; b < input.n; ++b)
        for (int j = 0; j < input.c; ++j) {
            const float v = grad_out.at(b, j, 0, 0) * inv;
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x) g.at(b, j, y, x) = v;
        }
    return g;
}

Tensor fc_forward(const Tensor& input, const FcWeights& w) {
    const std::int64_t in_count = static_cast<std::int64_t>(input.c) * input.h * input.w;
    check(in_count == w.in_units, "fc expects " + std::to_string(w.in_units) +
                                      " inputs, got " + input.shape_str());
    Tensor out(input.n, w.out_units, 1, 1);
    for (int b = 0; b < input.n; ++b) {
        const float* row = &input.data[static_cast<std::size_t>(b) * w.in_units];
        for (int o = 0; o < w.out_units; ++o) {
            double acc = w.bias[o];
            const float* wr = &w.weights[static_cast<std::size_t>(o) * w.in_units];
            for (int i = 0; i < w.in_units; ++i) acc += static_cast<double>(row[i]) * wr[i];
            out.at(b, o, 0, 0) = static_cast<float>(acc);
        }
    }
    return out;
}

FcGrads fc_backward(const Tensor& input, const FcWeights& w, const Tensor& grad_out) {
    const std::int64_t in_count = static_cast<std::int64_t>(input.c) * input.h * input.w;
    check(in_count == w.in_units, "fc expects " + std::to_string(w.in_units) +
                                      " inputs, got " + input.shape_str());
    check(grad_out.n == input.n && grad_out.c == w.out_units && grad_out.h == 1 &&
              grad_out.w == 1,
          "fc grad_out shape " + grad_out.shape_str() + " does not match forward output");
    FcGrads g;
    g.input = Tensor(input.n, input.c, input.h, input.w);
    g.weights = FcWeights(w.out_units, w.in_units);
    std::vector<double> wacc(w.weights.size(), 0.0);
    std::vector<double> bacc(w.bias.size(), 0.0);
    std::vector<double> iacc(input.data.size(), 0.0);
    for (int b = 0; b < input.n; ++b) {
        const float* row = &input.data[static_cast<std::size_t>(b) * w.in_units];
        for (int o = 0; o < w.out_units; ++o) {
            const double go = grad_out.at(b, o, 0, 0);
            bacc[o] += go;
            const float* wr = &w.weights[static_cast<std::size_t>(o) * w.in_units];
            double* wa = &wacc[static_cast<std::size_t>(o) * w.in_units];
            double* ia = &iacc[static_cast<std::size_t>(b) * w.in_units];
            for (int i = 0; i < w.in_units; ++i) {
                wa[i] += go * row[i];
                ia[i] += go * wr[i];
            }
        }
    }
    for (std::size_t i = 0; i < wacc.size(); ++i) g.weights.weights[i] = static_cast<float>(wacc[i]);
    for (std::size_t i = 0; i < bacc.size(); ++i) g.weights.bias[i] = static_cast<float>(bacc[i]);
    for (std::size_t i = 0; i < iacc.size(); ++i) g.input.data[i] = static_cast<float>(iacc[i]);
    return g;
}

Tensor batchnorm_forward(const Tensor& input, BatchNormParams& p, bool train,
                         BatchNormCache* cache, float running_momentum) {
    check(p.channels == input.c, "batchnorm expects " + std::to_string(p.channels) +
                                     " channels, got " + std::to_string(input.c));
    const std::int64_t per_channel = static_cast<std::int64_t>(input.n) * input.h * input.w;
    std::vector<float> mean(input.c), var(input.c);
    if (train) {
        for (int j = 0; j < input.c; ++j) {
            double acc = 0.0;
            for (int b = 0; b < input.n; ++b)
                for (int y = 0; y < input.h; ++y)
                    for (int x = 0; x < input.w; ++x) acc += input.at(b, j, y, x);
            const double mu = acc / per_channel;
            double vacc = 0.0;
            for (int b = 0; b < input.n; ++b)
                for (int y = 0; y < input.h; ++y)
                    for (int x = 0; x < input.w; ++x) {
                        const double d = input.at(b, j, y, x) - mu;
                        vacc += d * d;
                    }
            mean[j] = static_cast<float>(mu);
            var[j] = static_cast<float>(vacc / per_channel);
            p.running_mean[j] = (1.0f - running_momentum) * p.running_mean[j] +
                                running_momentum * mean[j];
            p.running_var[j] = (1.0f - running_momentum) * p.running_var[j] +
                               running_momentum * var[j];
        }
    } else {
        mean = p.running_mean;
        var = p.running_var;
    }
    if (cache) {
        cache->mean = mean;
        cache->var = var;
    }
    Tensor out(input.n, input.c, input.h, input.w);
    for (int j = 0; j < input.c; ++j) {
        // per-channel affine in double, one rounding per entry
        const double inv_std = 1.0 / std::sqrt(static_cast<double>(var[j]) + p.epsilon);
        const double a = p.scale[j] * inv_std;
        const double b0 = p.shift[j] - a * mean[j];
        for (int b = 0; b < input.n; ++b)
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x)
                    out.at(b, j, y, x) = static_cast<float>(a * input.at(b, j, y, x) + b0);
    }
    return out;
}

Tensor batchnorm_backward(const Tensor& input, const BatchNormParams& p,
                          const BatchNormCache& cache, const Tensor& grad_out,
                          BatchNormParams& grads, bool train_stats) {
    check(input.same_shape(grad_out), "batchnorm grad_out shape mismatch");
    check(static_cast<int>(cache.mean.size()) == input.c, "batchnorm cache channel mismatch");
    const double m = static_cast<double>(input.n) * input.h * input.w;
    grads = BatchNormParams(p.channels, p.epsilon);
    grads.scale.assign(p.channels, 0.0f);
    grads.shift.assign(p.channels, 0.0f);
    grads.running_mean.assign(p.channels, 0.0f);
    grads.running_var.assign(p.channels, 0.0f);
    Tensor g(input.n, input.c, input.h, input.w);
    for (int j = 0; j < input.c; ++j) {
        const double mu = cache.mean[j];
        const double inv_std = 1.0 / std::sqrt(static_cast<double>(cache.var[j]) + p.epsilon);
        double sum_g = 0.0, sum_gx = 0.0;
        for (int b = 0; b < input.n; ++b)
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x) {
                    const double go = grad_out.at(b, j, y, x);
                    sum_g += go;
                    sum_gx += go * ((input.at(b, j, y, x) - mu) * inv_std);
                }
        grads.shift[j] = static_cast<float>(sum_g);
        grads.scale[j] = static_cast<float>(sum_gx);
        const double gamma = p.scale[j];
        for (int b = 0; b < input.n; ++b)
            for (int y = 0; y < input.h; ++y)
                for (int x = 0; x < input.w; ++x) {
                    const double go = grad_out.at(b, j, y, x);
                    if (train_stats) {
                        const double xh = (input.at(b, j, y, x) - mu) * inv_std;
                        g.at(b, j, y, x) = static_cast<float>(
                            gamma * inv_std * (go - sum_g / m - xh * sum_gx / m));
                    } else {
                        g.at(b, j, y, x) = static_cast<float>(gamma * inv_std * go);
                    }
                }
    }
    return g;
}

Tensor softmax_forward(const Tensor& logits) {
    check(logits.h == 1 && logits.w == 1, "softmax expects (n,c,1,1), got " + logits.shape_str());
    Tensor out(logits.n, logits.c, 1, 1);
    for (int b = 0; b < logits.n; ++b) {
        float mx = logits.at(b, 0, 0, 0);
        for (int j = 1; j < logits.c; ++j) mx = std::max(mx, logits.at(b, j, 0, 0));
        double denom = 0.0;
        for (int j = 0; j < logits.c; ++j) denom += std::exp(static_cast<double>(logits.at(b, j, 0, 0)) - mx);
        for (int j = 0; j < logits.c; ++j)
            out.at(b, j, 0, 0) = static_cast<float>(
                std::exp(static_cast<double>(logits.at(b, j, 0, 0)) - mx) / denom);
    }
    return out;
}

SoftmaxLoss softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    check(logits.h == 1 && logits.w == 1,
          "cross-entropy expects logits shaped (n,c,1,1), got " + logits.shape_str());
    check(static_cast<int>(labels.size()) == logits.n, "label count does not match batch");
    SoftmaxLoss r;
    r.grad_logits = Tensor(logits.n, logits.c, 1, 1);
    double total = 0.0;
    const float inv_n = 1.0f / logits.n;
    for (int b = 0; b < logits.n; ++b) {
        const int lab = labels[b];
        check(lab >= 0 && lab < logits.c,
              "label " + std::to_string(lab) + " out of range for " + std::to_string(logits.c) +
                  " classes");
        float mx = logits.at(b, 0, 0, 0);
        for (int j = 1; j < logits.c; ++j) mx = std::max(mx, logits.at(b, j, 0, 0));
        double denom = 0.0;
        for (int j = 0; j < logits.c; ++j)
            denom += std::exp(static_cast<double>(logits.at(b, j, 0, 0)) - mx);
        const double log_denom = std::log(denom);
        total += log_denom - (static_cast<double>(logits.at(b, lab, 0, 0)) - mx);
        for (int j = 0; j < logits.c; ++j) {
            const double pj =
                std::exp(static_cast<double>(logits.at(b, j, 0, 0)) - mx) / denom;
            r.grad_logits.at(b, j, 0, 0) =
                static_cast<float>(pj - (j == lab ? 1.0 : 0.0)) * inv_n;
        }
    }
    r.loss = total / logits.n;
    return r;
}

bool sgd_step(std::span<float> param, std::span<const float> grad, std::span<float> velocity,
              float lr, float momentum, float weight_decay) {
    check(param.size() == grad.size() && param.size() == velocity.size(),
          "sgd parameter/gradient/velocity sizes differ");
    for (float g : grad)
        if (!std::isfinite(g)) return false;
    for (std::size_t i = 0; i < param.size(); ++i) {
        velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
        param[i] -= lr * velocity[i];
    }
    return true;
}

} // namespace prunekit
