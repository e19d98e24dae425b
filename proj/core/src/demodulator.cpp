#include "oamfso/demodulator.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "oamfso/autoencoder.hpp"

namespace oamfso::cnn {

using nn::Tensor;

void CnnArchitecture::validate() const {
    require(image_side >= 4 && image_side % 4 == 0, Errc::invalid_argument,
            "image side must be a positive multiple of 4");
    require(hidden >= 1 && classes >= 2, Errc::invalid_argument, "need >= 1 hidden unit and >= 2 classes");
}

CnnParams CnnParams::zeros(const CnnArchitecture& arch) {
    arch.validate();
    return {arch, nn::ConvLayer::zeros(1, 1, 2), nn::DenseLayer::zeros(arch.features(), arch.hidden),
            nn::DenseLayer::zeros(arch.hidden, arch.classes)};
}

CnnParams CnnParams::init(const CnnArchitecture& arch, Rng& rng) {
    arch.validate();
    CnnParams p;
    p.arch = arch;
    p.conv = nn::ConvLayer::he_normal(1, 1, 2, 1, rng);
    p.fc = nn::DenseLayer::he_normal(arch.features(), arch.hidden, rng);
    p.out = nn::DenseLayer::he_normal(arch.hidden, arch.classes, rng);
    return p;
}

std::vector<nn::ParamBlock> CnnParams::blocks() {
    return {
        {"conv.kernel", {1, 1, nn::kKernelSide, nn::kKernelSide}, conv.kernel},
        {"conv.bias", {conv.bias.size()}, conv.bias},
        {"fc.weight", {fc.inputs, fc.outputs}, fc.weight},
        {"fc.bias", {fc.outputs}, fc.bias},
        {"out.weight", {out.inputs, out.outputs}, out.weight},
        {"out.bias", {out.outputs}, out.bias},
    };
}

bool CnnParams::all_finite() const {
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(conv.kernel) && finite(conv.bias) && finite(fc.weight) && finite(fc.bias) &&
           finite(out.weight) && finite(out.bias);
}

namespace {

void require_image(const Tensor& image, const CnnArchitecture& arch) {
    require(image.shape() == nn::Shape{1, arch.image_side, arch.image_side}, Errc::shape_mismatch,
            "classifier expects {1, " + std::to_string(arch.image_side) + ", " +
                std::to_string(arch.image_side) + "}, got " + nn::shape_string(image.shape()));
}

}  // namespace

Tensor cnn_forward(const Tensor& image, const CnnParams& params) {
    require_image(image, params.arch);
    const Tensor pooled = nn::maxpool2x2(nn::relu(nn::conv2d(image, params.conv))).output;
    const Tensor hidden = nn::relu(nn::dense(pooled.reshaped({1, pooled.size()}), params.fc));
    return nn::dense(hidden, params.out).reshaped({params.arch.classes});
}

double cnn_loss_and_grad(std::span<const Tensor> images, std::span<const int> labels,
                         const CnnParams& params, CnnParams& grads) {
    const std::size_t batch = images.size();
    require(batch > 0 && labels.size() == batch, Errc::shape_mismatch, "one label per image");
    const std::size_t nfeat = params.arch.features();

    std::vector<Tensor> conv_out(batch), relu_out(batch);
    std::vector<nn::PoolResult> pools(batch);
    Tensor features({batch, nfeat});
    for (std::size_t b = 0; b < batch; ++b) {
        require_image(images[b], params.arch);
        conv_out[b] = nn::conv2d(images[b], params.conv);
        relu_out[b] = nn::relu(conv_out[b]);
        pools[b] = nn::maxpool2x2(relu_out[b]);
        std::copy(pools[b].output.data(), pools[b].output.data() + nfeat, features.data() + b * nfeat);
    }
    const Tensor pre_hidden = nn::dense(features, params.fc);
    const Tensor hidden = nn::relu(pre_hidden);
    const Tensor logits = nn::dense(hidden, params.out);
    const nn::LossResult loss = nn::softmax_cross_entropy(logits, labels);

    const Tensor g_hidden = nn::dense_backward(hidden, params.out, loss.grad, grads.out);
    const Tensor g_pre = nn::relu_backward(pre_hidden, g_hidden);
    const Tensor g_features = nn::dense_backward(features, params.fc, g_pre, grads.fc);
    for (std::size_t b = 0; b < batch; ++b) {
        const Tensor g_pool(pools[b].output.shape(),
                            std::vector<double>(g_features.data() + b * nfeat,
                                                g_features.data() + (b + 1) * nfeat));
        const Tensor g_relu = nn::maxpool2x2_backward(relu_out[b], pools[b], g_pool);
        nn::conv2d_backward(images[b], params.conv, nn::relu_backward(conv_out[b], g_relu), grads.conv);
    }
    return loss.value;
}

int argmax(std::span<const double> logits) {
    require(!logits.empty(), Errc::empty_input, "no logits");
    // max_element keeps the first of equal maxima.
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

channel::Symbol classify(const Tensor& image, const CnnParams& params) {
    return channel::Symbol(argmax(cnn_forward(image, params).values()));
}

channel::Symbol classify(std::span<const double> pixels, const CnnModel& model) {
    return classify(gnn::to_tensor(pixels, model.params.arch.image_side, model.scale), model.params);
}

CnnTrainResult train_cnn(const CnnTrainingSet& data, double scale, const CnnArchitecture& arch,
                         const CnnTrainConfig& config, const std::function<void(int, double)>& on_epoch) {
    arch.validate();
    require(!data.images.empty(), Errc::empty_input, "training set is empty");
    require(data.labels.size() == data.images.size(), Errc::shape_mismatch, "one label per image");
    require(config.epochs >= 0 && config.batch_size >= 1, Errc::invalid_argument,
            "epochs must be >= 0 and batch size >= 1");
    require(config.lr > 0.0 && scale > 0.0, Errc::invalid_argument, "learning rate and scale must be > 0");
    std::vector<std::size_t> per_class(arch.classes, 0);
    for (int label : data.labels) {
        require(label >= 0 && static_cast<std::size_t>(label) < arch.classes, Errc::invalid_argument,
                "label " + std::to_string(label) + " out of range");
        ++per_class[static_cast<std::size_t>(label)];
    }
    for (std::size_t c = 0; c < arch.classes; ++c) {
        require(per_class[c] > 0, Errc::missing_class, "class " + std::to_string(c) + " has no images");
    }

    std::vector<Tensor> inputs;
    inputs.reserve(data.images.size());
    for (const auto& img : data.images) {
        require(static_cast<std::size_t>(img.side()) == arch.image_side, Errc::shape_mismatch,
                "image side differs from architecture");
        inputs.push_back(gnn::to_tensor(img.values(), arch.image_side, scale));
    }

    Rng init_rng(derive_seed(config.seed, {0xc11}));
    CnnParams params = CnnParams::init(arch, init_rng);
    CnnParams grads = params.zeros_like();
    auto param_blocks = params.blocks();
    auto grad_blocks = grads.blocks();
    nn::Adam optimiser({.lr = config.lr}, param_blocks);

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    CnnTrainResult result;
    std::vector<Tensor> batch_in;
    std::vector<int> batch_labels;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, {0x5afe, static_cast<std::uint64_t>(epoch)}));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch_in.clear();
            batch_labels.clear();
            for (std::size_t k = start; k < stop; ++k) {
                batch_in.push_back(inputs[order[k]]);
                batch_labels.push_back(data.labels[order[k]]);
            }
            for (auto& g : grad_blocks) std::fill(g.values.begin(), g.values.end(), 0.0);
            const double loss = cnn_loss_and_grad(batch_in, batch_labels, params, grads);
            require(std::isfinite(loss), Errc::non_finite,
                    "classifier loss became non-finite at epoch " + std::to_string(epoch));
            optimiser.step(param_blocks, grad_blocks);
            epoch_loss += loss * static_cast<double>(stop - start);
        }
        epoch_loss /= static_cast<double>(order.size());
        result.loss_history.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    require(params.all_finite(), Errc::non_finite, "classifier weights became non-finite");
    result.model = CnnModel{std::move(params), scale};
    return result;
}

double accuracy(const CnnModel& model, const CnnTrainingSet& data) {
    require(!data.images.empty() && data.labels.size() == data.images.size(), Errc::empty_input,
            "need labelled images");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.images.size(); ++i) {
        if (classify(data.images[i].values(), model).ell() == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(data.images.size());
}

}  // namespace oamfso::cnn
