#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "oamfso/nn/tensor.hpp"
#include "oamfso/rng.hpp"

namespace oamfso::nn {

inline constexpr int kKernelSide = 5;
inline constexpr std::size_t kKernelTaps = kKernelSide * kKernelSide;

/// 5x5 convolution with "same" zero padding. The kernel is laid out as
/// [out_channels][in_channels][5][5]. When the layer is applied transposed
/// (transpose_conv2d) it maps out_channels back to in_channels and the bias
/// must then hold in_channels entries.
struct ConvLayer {
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    int stride = 1;
    std::vector<double> kernel;
    std::vector<double> bias;

    static ConvLayer zeros(std::size_t in_channels, std::size_t out_channels, int stride,
                           std::size_t bias_size);
    static ConvLayer zeros(std::size_t in_channels, std::size_t out_channels, int stride) {
        return zeros(in_channels, out_channels, stride, out_channels);
    }
    /// N(0, 2 / fan_in) weights, zero bias.
    static ConvLayer he_normal(std::size_t in_channels, std::size_t out_channels, int stride,
                               std::size_t bias_size, Rng& rng);

    [[nodiscard]] double& tap(std::size_t out, std::size_t in, int ky, int kx) {
        return kernel[((out * in_channels + in) * kKernelSide + ky) * kKernelSide + kx];
    }
    [[nodiscard]] ConvLayer zeros_like() const;
    void validate() const;
};

/// Affine map y = x W + b with W stored [inputs][outputs].
struct DenseLayer {
    std::size_t inputs = 0;
    std::size_t outputs = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    static DenseLayer zeros(std::size_t inputs, std::size_t outputs);
    static DenseLayer he_normal(std::size_t inputs, std::size_t outputs, Rng& rng);
    [[nodiscard]] DenseLayer zeros_like() const;
    void validate() const;
};

/// Output side of a "same" convolution: ceil(extent / stride).
std::size_t conv_output_extent(std::size_t extent, int stride);

// Every backward routine below accumulates parameter gradients into a
// layer-shaped `grads` object and returns the gradient w.r.t. its input.

/// Cross-correlation, input {Cin, H, W} -> {Cout, ceil(H/s), ceil(W/s)}.
Tensor conv2d(const Tensor& input, const ConvLayer& layer);
Tensor conv2d_backward(const Tensor& input, const ConvLayer& layer, const Tensor& grad_output,
                       ConvLayer& grads);

/// Adjoint of conv2d's linear part: {Cout, h, w} -> {Cin, out_h, out_w} with
/// ceil(out_h / s) == h. Adds layer.bias (size Cin) when it is non-empty.
Tensor transpose_conv2d(const Tensor& input, const ConvLayer& layer, std::size_t out_h,
                        std::size_t out_w);
Tensor transpose_conv2d_backward(const Tensor& input, const ConvLayer& layer,
                                 const Tensor& grad_output, ConvLayer& grads);

struct PoolResult {
    Tensor output;
    std::vector<std::uint32_t> argmax;  // flat input index per output element
};

/// 2x2 max-pool with stride 2; ties resolve to the first index in row-major order.
PoolResult maxpool2x2(const Tensor& input);
Tensor maxpool2x2_backward(const Tensor& input, const PoolResult& forward, const Tensor& grad_output);

/// Input {N} or {B, N}; output {B, outputs} (B = 1 for a flat input).
Tensor dense(const Tensor& input, const DenseLayer& layer);
Tensor dense_backward(const Tensor& input, const DenseLayer& layer, const Tensor& grad_output,
                      DenseLayer& grads);

Tensor relu(const Tensor& input);
/// Subgradient 0 at input == 0.
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

/// Inverted-dropout multipliers: 0 with probability `rate`, else 1 / (1 - rate).
std::vector<double> dropout_mask(std::size_t size, double rate, Rng& rng);
Tensor apply_mask(const Tensor& input, std::span<const double> mask);
/// Identity when !training or rate == 0.
Tensor dropout(const Tensor& input, double rate, Rng& rng, bool training);

struct LossResult {
    double value = 0.0;
    Tensor grad;
};

/// Mean of (pred - target)^2 over every element.
LossResult mse_loss(const Tensor& pred, const Tensor& target);

/// Logits {K} or {B, K}; loss is the batch mean of -log softmax[label].
LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace oamfso::nn
