#include <gtest/gtest.h>

#include <cmath>

#include "grad_check.hpp"
#include "oamfso/autoencoder.hpp"

namespace oamfso::gnn {
namespace {

using nn::Shape;
using nn::Tensor;

GnnArchitecture small_arch() { return {.latent_side = 3, .image_side = 16, .feature_maps = 2, .dropout = 0.0}; }

void randomise_biases(GnnParams& p, Rng& rng) {
    for (auto& b : p.blocks()) {
        if (b.name.ends_with(".bias")) {
            for (auto& v : b.values) v = 0.1 * rng.normal();
        }
    }
}

TEST(Architecture, Validation) {
    EXPECT_THROW((GnnArchitecture{.image_side = 20}).validate(), Error);
    EXPECT_THROW((GnnArchitecture{.dropout = 1.0}).validate(), Error);
    EXPECT_NO_THROW(GnnArchitecture{}.validate());
    EXPECT_EQ(GnnArchitecture{}.encoder_features(), 768u);
    EXPECT_EQ(GnnArchitecture{}.decoder_side(), 64u);
}

TEST(Autoencoder, ShapeTrace) {
    Rng rng(1);
    const Autoencoder ae(GnnParams::init({.latent_side = 32}, rng));
    const auto latent = ae.encode(Tensor({1, 128, 128}, 0.3));
    EXPECT_EQ(latent.shape(), (Shape{1024}));
    const auto image = ae.decode(latent);
    EXPECT_EQ(image.shape(), (Shape{1, 128, 128}));
    EXPECT_EQ(ae.params().dec_fc.outputs, 64u * 64u * 3u);
    for (double v : image.values()) EXPECT_GE(v, 0.0);
    EXPECT_THROW((void)ae.encode(Tensor({1, 64, 64})), Error);
    EXPECT_THROW((void)ae.decode(Tensor({17})), Error);
}

TEST(Autoencoder, ZeroInputZeroBiasGivesZero) {
    Rng rng(2);
    const Autoencoder ae(GnnParams::init({.latent_side = 8}, rng));
    for (const auto out = ae.encode(Tensor({1, 128, 128})); double v : out.values()) EXPECT_EQ(v, 0.0);
    for (const auto out = ae.decode(Tensor({64})); double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Autoencoder, InferenceIsDeterministic) {
    Rng rng(3);
    const Autoencoder ae(GnnParams::init(small_arch(), rng));
    const auto x = test::random_tensor({1, 16, 16}, rng);
    EXPECT_EQ(ae.reconstruct(x), ae.reconstruct(x));
}

TEST(Autoencoder, ShrunkenEndToEndGradient) {
    Rng rng(4);
    GnnParams params = GnnParams::init(small_arch(), rng);
    randomise_biases(params, rng);
    std::vector<Tensor> inputs, targets;
    for (int i = 0; i < 2; ++i) {
        inputs.push_back(test::random_tensor({1, 16, 16}, rng));
        Tensor t({1, 16, 16});
        for (auto& v : t.values()) v = std::abs(rng.normal());
        targets.push_back(t);
    }
    Autoencoder ae(params);
    GnnParams grads = ae.params().zeros_like();
    ae.loss_and_grad(inputs, targets, grads, nullptr);
    auto loss = [&] { return ae.loss(inputs, targets); };
    auto p_blocks = ae.params().blocks();
    auto g_blocks = grads.blocks();
    for (std::size_t k = 0; k < p_blocks.size(); ++k) {
        EXPECT_LT(test::worst_fd_error(p_blocks[k].values, g_blocks[k].values, loss), 1e-5) << p_blocks[k].name;
    }
}

TEST(Autoencoder, DropoutOnlyWithRng) {
    Rng rng(5);
    GnnArchitecture arch = small_arch();
    arch.dropout = 0.3;
    const Autoencoder ae(GnnParams::init(arch, rng));
    const std::vector<Tensor> x{test::random_tensor({1, 16, 16}, rng)};
    const std::vector<Tensor> y{Tensor({1, 16, 16}, 0.5)};
    GnnParams g1 = ae.params().zeros_like(), g2 = ae.params().zeros_like();
    EXPECT_EQ(ae.loss_and_grad(x, y, g1, nullptr), ae.loss(x, y));
    Rng drop(6);
    ae.loss_and_grad(x, y, g2, &drop);
    EXPECT_NE(g1.enc_fc.weight, g2.enc_fc.weight);
}

GnnTrainingSet toy_set(Rng& rng) {
    const GridSpec grid{.n = 16, .pitch = 3.5e-3};
    GnnTrainingSet set;
    for (int k = 0; k < 4; ++k) {
        IntensityImage t(grid);
        for (int r = 0; r < 16; ++r) {
            for (int c = 0; c < 16; ++c) {
                const double dr = r - 4.0 - 2.0 * k, dc = c - 8.0;
                t(r, c) = 100.0 * std::exp(-(dr * dr + dc * dc) / 6.0);
            }
        }
        set.targets.push_back(t);
    }
    for (int i = 0; i < 16; ++i) {
        NoisyRaster x(grid);
        const auto& t = set.targets[static_cast<std::size_t>(i % 4)];
        for (std::size_t p = 0; p < x.size(); ++p) x[p] = t[p] + 10.0 * rng.normal();
        set.inputs.push_back(x);
        set.target_of.push_back(static_cast<std::size_t>(i % 4));
    }
    return set;
}

TEST(TrainGnn, ReducesLossDeterministically) {
    Rng rng(7);
    const auto data = toy_set(rng);
    GnnArchitecture arch{.latent_side = 4, .image_side = 16, .feature_maps = 3, .dropout = 0.05};
    const GnnTrainConfig cfg{.lr = 1e-3, .epochs = 60, .batch_size = 4, .seed = 3};
    const auto a = train_gnn(data, arch, cfg);
    const auto b = train_gnn(data, arch, cfg);
    ASSERT_EQ(a.loss_history.size(), 60u);
    EXPECT_EQ(a.loss_history, b.loss_history);
    for (double l : a.loss_history) EXPECT_TRUE(std::isfinite(l));
    EXPECT_LT(a.loss_history.back(), 0.5 * a.loss_history.front());
    EXPECT_TRUE(a.model.params.all_finite());
    EXPECT_DOUBLE_EQ(a.model.scale, dataset_scale(data.targets));

    // Reconstruction beats the raw input on a training sample.
    const auto rec = reconstruct(data.inputs[1], a.model);
    const auto& target = data.targets[1];
    double mse_rec = 0.0, mse_raw = 0.0;
    for (std::size_t p = 0; p < target.size(); ++p) {
        mse_rec += std::pow(rec[p] - target[p], 2);
        mse_raw += std::pow(data.inputs[1][p] - target[p], 2);
        EXPECT_GE(rec[p], 0.0);
    }
    EXPECT_LT(mse_rec, mse_raw);
    EXPECT_EQ(reconstruct(data.inputs[1], a.model), rec);
}

TEST(TrainGnn, RejectsBadInput) {
    Rng rng(8);
    EXPECT_THROW(train_gnn({}, small_arch(), {}), Error);
    auto data = toy_set(rng);
    data.target_of[0] = 9;
    EXPECT_THROW(train_gnn(data, {.latent_side = 4, .image_side = 16}, {.epochs = 1}), Error);
}

TEST(Reconstruct, RejectsNonFiniteWeights) {
    Rng rng(9);
    GnnModel model{GnnParams::init(small_arch(), rng), 1.0};
    model.params.dec_out.kernel[0] = std::nan("");
    try {
        (void)reconstruct(NoisyRaster(GridSpec{.n = 16}), model);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::non_finite);
    }
}

}  // namespace
}  // namespace oamfso::gnn
