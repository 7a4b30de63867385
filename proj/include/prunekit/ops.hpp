#pragma once

#include <span>

#include "prunekit/tensor.hpp"

namespace prunekit {

// cross-correlation (no kernel flip), zero padding, floor output sizing
Tensor conv2d_forward(const Tensor& input, const ConvWeights& w, int stride, int pad);

struct ConvGrads {
    Tensor input;
    ConvWeights weights; // filters/bias hold the gradients
};
ConvGrads conv2d_backward(const Tensor& input, const ConvWeights& w, const Tensor& grad_out,
                          int stride, int pad);

Tensor relu_forward(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

Tensor maxpool_forward(const Tensor& input, int window, int stride);
// argmax is recomputed; ties resolve to the first maximum in scan order
Tensor maxpool_backward(const Tensor& input, int window, int stride, const Tensor& grad_out);

Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Tensor& input, const Tensor& grad_out);

Tensor fc_forward(const Tensor& input, const FcWeights& w);
struct FcGrads {
    Tensor input;
    FcWeights weights;
};
FcGrads fc_backward(const Tensor& input, const FcWeights& w, const Tensor& grad_out);

struct BatchNormCache {
    std::vector<float> mean, var; // batch statistics used by the forward pass
};
// train mode normalizes with batch statistics and updates running moments in place;
// eval mode uses the stored running moments and leaves them untouched
Tensor batchnorm_forward(const Tensor& input, BatchNormParams& p, bool train,
                         BatchNormCache* cache, float running_momentum = 0.1f);
// train_stats=true differentiates through the batch statistics; false treats
// the cached moments as constants (the eval-mode affine view)
Tensor batchnorm_backward(const Tensor& input, const BatchNormParams& p,
                          const BatchNormCache& cache, const Tensor& grad_out,
                          BatchNormParams& grads, bool train_stats = true);

Tensor softmax_forward(const Tensor& logits);

struct SoftmaxLoss {
    double loss = 0.0;
    Tensor grad_logits;
};
// mean cross-entropy over the batch; grad is (softmax - onehot) / batch
SoftmaxLoss softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

// v <- momentum*v + grad + weight_decay*param; param <- param - lr*v
// returns false (and applies nothing) if any gradient entry is non-finite
bool sgd_step(std::span<float> param, std::span<const float> grad, std::span<float> velocity,
              float lr, float momentum, float weight_decay);

} // namespace prunekit
