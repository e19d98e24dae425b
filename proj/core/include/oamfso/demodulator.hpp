#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "oamfso/channel.hpp"
#include "oamfso/nn/adam.hpp"
#include "oamfso/nn/layers.hpp"

namespace oamfso::cnn {

struct CnnArchitecture {
    std::size_t image_side = 128;
    std::size_t hidden = 784;
    std::size_t classes = channel::kNumSymbols;

    void validate() const;
    /// Flattened pooled map: (side / 4)^2.
    [[nodiscard]] std::size_t features() const noexcept { return (image_side / 4) * (image_side / 4); }
};

struct CnnParams {
    CnnArchitecture arch;
    nn::ConvLayer conv;  // 1 -> 1, stride 2
    nn::DenseLayer fc;   // features -> hidden
    nn::DenseLayer out;  // hidden -> classes

    static CnnParams init(const CnnArchitecture& arch, Rng& rng);
    static CnnParams zeros(const CnnArchitecture& arch);
    [[nodiscard]] CnnParams zeros_like() const { return zeros(arch); }

    std::vector<nn::ParamBlock> blocks();
    [[nodiscard]] bool all_finite() const;
};

/// {1, S, S} -> {classes} logits.
nn::Tensor cnn_forward(const nn::Tensor& image, const CnnParams& params);

/// Mean cross-entropy of the batch; grads accumulate into `grads`.
double cnn_loss_and_grad(std::span<const nn::Tensor> images, std::span<const int> labels,
                         const CnnParams& params, CnnParams& grads);

/// Index of the largest logit, ties toward the smallest index.
int argmax(std::span<const double> logits);

struct CnnModel {
    CnnParams params;
    double scale = 1.0;
};

channel::Symbol classify(const nn::Tensor& image, const CnnParams& params);
/// Scales the raster by model.scale before classifying.
channel::Symbol classify(std::span<const double> pixels, const CnnModel& model);

struct CnnTrainingSet {
    std::vector<NoisyRaster> images;
    std::vector<int> labels;
};

struct CnnTrainConfig {
    double lr = 1e-3;
    int epochs = 15;
    std::size_t batch_size = 32;
    std::uint64_t seed = 1;
};

struct CnnTrainResult {
    CnnModel model;
    std::vector<double> loss_history;
};

/// `scale` is the dataset-wide divisor (largest clean-target pixel).
CnnTrainResult train_cnn(const CnnTrainingSet& data, double scale, const CnnArchitecture& arch,
                         const CnnTrainConfig& config,
                         const std::function<void(int, double)>& on_epoch = {});

/// Fraction of images classified as their label.
double accuracy(const CnnModel& model, const CnnTrainingSet& data);

}  // namespace oamfso::cnn
