#include <gtest/gtest.h>

#include <cmath>

#include "oamfso/autoencoder.hpp"
#include "oamfso/dataset_io.hpp"

namespace oamfso::gnn {
namespace {

// Desk-scale training split: 20 screens per class, 14 for training, sigma 50.
GnnTrainingSet desk_set(std::uint64_t seed) {
    const auto data = io::generate_gnn_dataset({}, {.sigma = 50.0, .n_screens = 20, .train_screens = 14, .seed = seed});
    GnnTrainingSet set;
    for (std::size_t i = 0; i < data.train.manifest.n_images; ++i) set.inputs.push_back(data.train.noisy_raster(i));
    for (std::size_t t = 0; t < data.train.manifest.n_targets; ++t) set.targets.push_back(data.train.target_image(t));
    set.target_of = data.train.manifest.target_of;
    return set;
}

TEST(DeskScale, LossHalvesWithin200Epochs) {
    const auto set = desk_set(1);
    const auto result = train_gnn(set, GnnArchitecture{}, GnnTrainConfig{.epochs = 200, .seed = 1});
    ASSERT_EQ(result.loss_history.size(), 200u);
    EXPECT_LT(result.loss_history.back(), 0.5 * result.loss_history.front());
}

TEST(DeskScale, HighLearningRateStaysFinite) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto set = desk_set(seed);
        const auto result = train_gnn(set, GnnArchitecture{}, GnnTrainConfig{.lr = 0.008, .epochs = 20, .seed = seed});
        for (double loss : result.loss_history) EXPECT_TRUE(std::isfinite(loss)) << seed;
        EXPECT_TRUE(result.model.params.all_finite()) << seed;
    }
}

}  // namespace
}  // namespace oamfso::gnn
