#include <gtest/gtest.h>

#include "grad_check.hpp"
#include "oamfso/demodulator.hpp"

namespace oamfso::cnn {
namespace {

using nn::Shape;
using nn::Tensor;

TEST(Cnn, ShapeTrace) {
    Rng rng(1);
    const auto p = CnnParams::init({}, rng);
    EXPECT_EQ(p.fc.inputs, 1024u);
    EXPECT_EQ(p.fc.outputs, 784u);
    EXPECT_EQ(cnn_forward(Tensor({1, 128, 128}, 0.2), p).shape(), (Shape{11}));
    EXPECT_THROW((void)cnn_forward(Tensor({1, 64, 64}), p), Error);
}

TEST(Cnn, ZeroInputZeroBiasGivesZeroLogits) {
    Rng rng(2);
    const auto p = CnnParams::init({}, rng);
    for (const auto out = cnn_forward(Tensor({1, 128, 128}), p); double v : out.values()) EXPECT_EQ(v, 0.0);
}

TEST(Cnn, ArgmaxTieBreak) {
    std::vector<double> logits(11, 0.0);
    EXPECT_EQ(argmax(logits), 0);
    logits[7] = 1.0;
    EXPECT_EQ(argmax(logits), 7);
    logits[9] = 1.0;
    EXPECT_EQ(argmax(logits), 7);
}

TEST(Cnn, LossGradientMatchesFiniteDifferences) {
    Rng rng(3);
    const CnnArchitecture arch{.image_side = 16, .hidden = 6, .classes = 11};
    auto params = CnnParams::init(arch, rng);
    for (auto& b : params.blocks()) {
        if (b.name.ends_with(".bias")) {
            for (auto& v : b.values) v = 0.1 * rng.normal();
        }
    }
    const std::vector<Tensor> images{test::random_tensor({1, 16, 16}, rng), test::random_tensor({1, 16, 16}, rng)};
    const std::vector<int> labels{2, 9};
    auto grads = params.zeros_like();
    cnn_loss_and_grad(images, labels, params, grads);
    auto loss = [&] {
        auto scratch = params.zeros_like();
        return cnn_loss_and_grad(images, labels, params, scratch);
    };
    auto pb = params.blocks();
    auto gb = grads.blocks();
    for (std::size_t k = 0; k < pb.size(); ++k) {
        EXPECT_LT(test::worst_fd_error(pb[k].values, gb[k].values, loss), 1e-6) << pb[k].name;
    }
}

CnnTrainingSet toy_set(int per_class, Rng& rng) {
    const GridSpec grid{.n = 16, .pitch = 3.5e-3};
    CnnTrainingSet set;
    for (int k = 0; k < 11; ++k) {
        for (int i = 0; i < per_class; ++i) {
            NoisyRaster x(grid);
            const int r0 = (k / 4) * 5 + 1;
            const int c0 = (k % 4) * 4;
            for (int r = r0; r < r0 + 3; ++r)
                for (int c = c0; c < c0 + 3; ++c) x(r, c) = 50.0;
            for (auto& v : x.values()) v += 2.0 * rng.normal();
            set.images.push_back(x);
            set.labels.push_back(k);
        }
    }
    return set;
}

TEST(TrainCnn, LearnsSeparableClassesDeterministically) {
    Rng rng(4);
    const auto train = toy_set(12, rng);
    const auto test = toy_set(4, rng);
    const CnnArchitecture arch{.image_side = 16, .hidden = 32, .classes = 11};
    const CnnTrainConfig cfg{.lr = 3e-3, .epochs = 30, .batch_size = 16, .seed = 5};
    const auto a = train_cnn(train, 50.0, arch, cfg);
    const auto b = train_cnn(train, 50.0, arch, cfg);
    EXPECT_EQ(a.loss_history, b.loss_history);
    EXPECT_EQ(a.model.params.fc.weight, b.model.params.fc.weight);
    EXPECT_GE(accuracy(a.model, test), 0.99);
    EXPECT_EQ(classify(test.images[4 * 3].values(), a.model), channel::Symbol(3));
}

TEST(TrainCnn, PermutedOrderKeepsAccuracy) {
    Rng rng(6);
    auto train = toy_set(12, rng);
    const auto test = toy_set(4, rng);
    const CnnArchitecture arch{.image_side = 16, .hidden = 32, .classes = 11};
    const CnnTrainConfig cfg{.lr = 3e-3, .epochs = 30, .batch_size = 16, .seed = 5};
    const auto a = train_cnn(train, 50.0, arch, cfg);
    std::reverse(train.images.begin(), train.images.end());
    std::reverse(train.labels.begin(), train.labels.end());
    const auto b = train_cnn(train, 50.0, arch, cfg);
    EXPECT_NE(a.model.params.fc.weight, b.model.params.fc.weight);
    EXPECT_GE(accuracy(b.model, test), 0.99);
}

TEST(TrainCnn, MissingClassIsAnError) {
    Rng rng(7);
    auto train = toy_set(2, rng);
    for (auto& l : train.labels) l = l == 10 ? 9 : l;
    try {
        train_cnn(train, 50.0, {.image_side = 16, .hidden = 8}, {.epochs = 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::missing_class);
    }
}

}  // namespace
}  // namespace oamfso::cnn
