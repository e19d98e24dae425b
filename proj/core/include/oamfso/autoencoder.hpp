#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "oamfso/channel.hpp"
#include "oamfso/nn/adam.hpp"
#include "oamfso/nn/layers.hpp"

namespace oamfso::gnn {

/// Denoising autoencoder shape. The image side must be a multiple of 8;
/// production runs use 128, gradient tests a 16-pixel clone.
struct GnnArchitecture {
    std::size_t latent_side = 32;
    std::size_t image_side = 128;
    std::size_t feature_maps = 3;
    double dropout = 0.05;

    void validate() const;
    [[nodiscard]] std::size_t latent_units() const noexcept { return latent_side * latent_side; }
    /// Flattened encoder output: (side / 8)^2 * maps (768 for 128 px).
    [[nodiscard]] std::size_t encoder_features() const noexcept;
    /// Decoder seed map side: side / 2 (64 for 128 px).
    [[nodiscard]] std::size_t decoder_side() const noexcept { return image_side / 2; }
};

struct GnnParams {
    GnnArchitecture arch;
    nn::ConvLayer enc_conv1;  // 1 -> maps, stride 2
    nn::ConvLayer enc_conv2;  // maps -> maps, stride 2
    nn::DenseLayer enc_fc;    // features -> latent
    nn::DenseLayer dec_fc;    // latent -> (side/2)^2 * maps
    nn::ConvLayer dec_conv;   // maps -> maps, stride 1
    nn::ConvLayer dec_tconv;  // applied transposed, stride 2
    nn::ConvLayer dec_out;    // maps -> 1, stride 1

    /// He-normal weights, zero biases.
    static GnnParams init(const GnnArchitecture& arch, Rng& rng);
    static GnnParams zeros(const GnnArchitecture& arch);
    [[nodiscard]] GnnParams zeros_like() const { return zeros(arch); }

    /// Fixed-order named view used by the optimiser and weight files.
    std::vector<nn::ParamBlock> blocks();
    [[nodiscard]] bool all_finite() const;
};

class Autoencoder {
public:
    explicit Autoencoder(GnnParams params) : params_(std::move(params)) {}

    [[nodiscard]] const GnnParams& params() const noexcept { return params_; }
    GnnParams& params() noexcept { return params_; }

    /// {1, S, S} -> {latent}; dropout off.
    [[nodiscard]] nn::Tensor encode(const nn::Tensor& image) const;
    /// {latent} -> {1, S, S}; dropout off.
    [[nodiscard]] nn::Tensor decode(const nn::Tensor& latent) const;
    [[nodiscard]] nn::Tensor reconstruct(const nn::Tensor& image) const { return decode(encode(image)); }

    /// Mean squared reconstruction loss of the batch; grads are accumulated
    /// into `grads`. `dropout_rng` == nullptr disables dropout.
    double loss_and_grad(std::span<const nn::Tensor> inputs, std::span<const nn::Tensor> targets,
                         GnnParams& grads, Rng* dropout_rng) const;

    /// Loss only, for finite-difference checks.
    [[nodiscard]] double loss(std::span<const nn::Tensor> inputs, std::span<const nn::Tensor> targets) const;

private:
    GnnParams params_;
};

struct GnnTrainingSet {
    std::vector<NoisyRaster> inputs;
    std::vector<IntensityImage> targets;   // one per class
    std::vector<std::size_t> target_of;    // index into targets per input
};

struct GnnTrainConfig {
    // 0.008 drives the output ReLU dead on the desk-scale set.
    double lr = 1e-3;
    int epochs = 200;
    std::size_t batch_size = 11;
    std::uint64_t seed = 1;
};

/// Trained network plus the intensity scale it was trained under
/// (network units = intensity / scale).
struct GnnModel {
    GnnParams params;
    double scale = 1.0;
};

struct GnnTrainResult {
    GnnModel model;
    std::vector<double> loss_history;  // mean training loss per epoch
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Largest pixel over the clean targets; the shared input/target divisor.
double dataset_scale(std::span<const IntensityImage> targets);

GnnTrainResult train_gnn(const GnnTrainingSet& data, const GnnArchitecture& arch,
                         const GnnTrainConfig& config, const EpochCallback& on_epoch = {});

nn::Tensor to_tensor(std::span<const double> pixels, std::size_t side, double scale);

/// Corrected intensity image for a received raster, in intensity units.
/// Throws Errc::non_finite when the parameters hold NaN or Inf.
IntensityImage reconstruct(const NoisyRaster& image, const GnnModel& model);
inline IntensityImage reconstruct(const channel::NoisyImage& image, const GnnModel& model) {
    return reconstruct(image.pixels, model);
}

}  // namespace oamfso::gnn
