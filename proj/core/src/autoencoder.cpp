#include "oamfso/autoencoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace oamfso::gnn {

using nn::ConvLayer;
using nn::DenseLayer;
using nn::Tensor;

void GnnArchitecture::validate() const {
    require(latent_side >= 1, Errc::invalid_argument, "latent side must be >= 1");
    require(image_side >= 8 && image_side % 8 == 0, Errc::invalid_argument,
            "image side must be a positive multiple of 8");
    require(feature_maps >= 1, Errc::invalid_argument, "need at least one feature map");
    require(dropout >= 0.0 && dropout < 1.0, Errc::invalid_argument, "dropout rate must lie in [0, 1)");
}

std::size_t GnnArchitecture::encoder_features() const noexcept {
    const std::size_t side = image_side / 8;
    return side * side * feature_maps;
}

GnnParams GnnParams::zeros(const GnnArchitecture& arch) {
    arch.validate();
    const std::size_t maps = arch.feature_maps;
    const std::size_t dec = arch.decoder_side();
    GnnParams p;
    p.arch = arch;
    p.enc_conv1 = ConvLayer::zeros(1, maps, 2);
    p.enc_conv2 = ConvLayer::zeros(maps, maps, 2);
    p.enc_fc = DenseLayer::zeros(arch.encoder_features(), arch.latent_units());
    p.dec_fc = DenseLayer::zeros(arch.latent_units(), dec * dec * maps);
    p.dec_conv = ConvLayer::zeros(maps, maps, 1);
    p.dec_tconv = ConvLayer::zeros(maps, maps, 2, maps);
    p.dec_out = ConvLayer::zeros(maps, 1, 1);
    return p;
}

GnnParams GnnParams::init(const GnnArchitecture& arch, Rng& rng) {
    arch.validate();
    const std::size_t maps = arch.feature_maps;
    const std::size_t dec = arch.decoder_side();
    GnnParams p;
    p.arch = arch;
    p.enc_conv1 = ConvLayer::he_normal(1, maps, 2, maps, rng);
    p.enc_conv2 = ConvLayer::he_normal(maps, maps, 2, maps, rng);
    p.enc_fc = DenseLayer::he_normal(arch.encoder_features(), arch.latent_units(), rng);
    p.dec_fc = DenseLayer::he_normal(arch.latent_units(), dec * dec * maps, rng);
    p.dec_conv = ConvLayer::he_normal(maps, maps, 1, maps, rng);
    p.dec_tconv = ConvLayer::he_normal(maps, maps, 2, maps, rng);
    p.dec_out = ConvLayer::he_normal(maps, 1, 1, 1, rng);
    return p;
}

namespace {

void add_conv(std::vector<nn::ParamBlock>& out, const char* name, ConvLayer& layer) {
    out.push_back({std::string(name) + ".kernel",
                   {layer.out_channels, layer.in_channels, nn::kKernelSide, nn::kKernelSide},
                   layer.kernel});
    out.push_back({std::string(name) + ".bias", {layer.bias.size()}, layer.bias});
}

void add_dense(std::vector<nn::ParamBlock>& out, const char* name, DenseLayer& layer) {
    out.push_back({std::string(name) + ".weight", {layer.inputs, layer.outputs}, layer.weight});
    out.push_back({std::string(name) + ".bias", {layer.outputs}, layer.bias});
}

}  // namespace

std::vector<nn::ParamBlock> GnnParams::blocks() {
    std::vector<nn::ParamBlock> out;
    add_conv(out, "enc_conv1", enc_conv1);
    add_conv(out, "enc_conv2", enc_conv2);
    add_dense(out, "enc_fc", enc_fc);
    add_dense(out, "dec_fc", dec_fc);
    add_conv(out, "dec_conv", dec_conv);
    add_conv(out, "dec_tconv", dec_tconv);
    add_conv(out, "dec_out", dec_out);
    return out;
}

bool GnnParams::all_finite() const {
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    for (const ConvLayer* c : {&enc_conv1, &enc_conv2, &dec_conv, &dec_tconv, &dec_out}) {
        if (!finite(c->kernel) || !finite(c->bias)) return false;
    }
    for (const DenseLayer* d : {&enc_fc, &dec_fc}) {
        if (!finite(d->weight) || !finite(d->bias)) return false;
    }
    return true;
}

// ---- forward / backward ---------------------------------------------------

namespace {

struct SampleTrace {
    // encoder
    Tensor a1, h1;
    std::vector<double> m1;
    nn::PoolResult pool;
    Tensor a2;
    std::vector<double> m2;
    // decoder
    Tensor u0, a3, d3;
    std::vector<double> m3;
    Tensor a4, d4;
    std::vector<double> m4;
    Tensor a5;
};

Tensor masked(const Tensor& t, std::vector<double>& mask, double rate, Rng* rng) {
    if (rng == nullptr || rate == 0.0) {
        mask.clear();
        return t;
    }
    mask = nn::dropout_mask(t.size(), rate, *rng);
    return nn::apply_mask(t, mask);
}

Tensor unmask(Tensor grad, const std::vector<double>& mask) {
    if (mask.empty()) return grad;
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= mask[i];
    return grad;
}

void require_image_shape(const Tensor& t, const GnnArchitecture& arch) {
    require(t.shape() == nn::Shape{1, arch.image_side, arch.image_side}, Errc::shape_mismatch,
            "autoencoder expects {1, " + std::to_string(arch.image_side) + ", " +
                std::to_string(arch.image_side) + "}, got " + nn::shape_string(t.shape()));
}

// conv1 -> relu -> dropout -> maxpool -> conv2 -> relu -> dropout, flattened
// into row b of `features`.
void encoder_convs(const GnnParams& p, const Tensor& x, SampleTrace& tr, Rng* rng, double* features) {
    tr.a1 = nn::conv2d(x, p.enc_conv1);
    tr.h1 = masked(nn::relu(tr.a1), tr.m1, p.arch.dropout, rng);
    tr.pool = nn::maxpool2x2(tr.h1);
    tr.a2 = nn::conv2d(tr.pool.output, p.enc_conv2);
    const Tensor h2 = masked(nn::relu(tr.a2), tr.m2, p.arch.dropout, rng);
    std::copy(h2.data(), h2.data() + h2.size(), features);
}

// reshape -> conv -> relu -> dropout -> tconv -> relu -> dropout -> conv -> relu
Tensor decoder_convs(const GnnParams& p, const double* seed, SampleTrace& tr, Rng* rng) {
    const std::size_t maps = p.arch.feature_maps;
    const std::size_t dec = p.arch.decoder_side();
    tr.u0 = Tensor({maps, dec, dec}, std::vector<double>(seed, seed + maps * dec * dec));
    tr.a3 = nn::conv2d(tr.u0, p.dec_conv);
    tr.d3 = masked(nn::relu(tr.a3), tr.m3, p.arch.dropout, rng);
    tr.a4 = nn::transpose_conv2d(tr.d3, p.dec_tconv, p.arch.image_side, p.arch.image_side);
    tr.d4 = masked(nn::relu(tr.a4), tr.m4, p.arch.dropout, rng);
    tr.a5 = nn::conv2d(tr.d4, p.dec_out);
    return nn::relu(tr.a5);
}

}  // namespace

Tensor Autoencoder::encode(const Tensor& image) const {
    require_image_shape(image, params_.arch);
    SampleTrace tr;
    Tensor features({1, params_.arch.encoder_features()});
    encoder_convs(params_, image, tr, nullptr, features.data());
    return nn::dense(features, params_.enc_fc).reshaped({params_.arch.latent_units()});
}

Tensor Autoencoder::decode(const Tensor& latent) const {
    require(latent.size() == params_.arch.latent_units(), Errc::shape_mismatch,
            "latent vector has " + std::to_string(latent.size()) + " entries, expected " +
                std::to_string(params_.arch.latent_units()));
    const Tensor seed = nn::dense(latent.reshaped({1, latent.size()}), params_.dec_fc);
    SampleTrace tr;
    return decoder_convs(params_, seed.data(), tr, nullptr);
}

double Autoencoder::loss_and_grad(std::span<const Tensor> inputs, std::span<const Tensor> targets,
                                  GnnParams& grads, Rng* dropout_rng) const {
    const auto& p = params_;
    const std::size_t batch = inputs.size();
    require(batch > 0 && targets.size() == batch, Errc::shape_mismatch, "one target per input");
    const std::size_t nfeat = p.arch.encoder_features();
    const std::size_t nseed = p.dec_fc.outputs;
    const std::size_t npix = p.arch.image_side * p.arch.image_side;

    std::vector<SampleTrace> traces(batch);
    Tensor features({batch, nfeat});
    for (std::size_t b = 0; b < batch; ++b) {
        require_image_shape(inputs[b], p.arch);
        require_image_shape(targets[b], p.arch);
        encoder_convs(p, inputs[b], traces[b], dropout_rng, features.data() + b * nfeat);
    }
    const Tensor latent = nn::dense(features, p.enc_fc);
    const Tensor seeds = nn::dense(latent, p.dec_fc);

    // Loss: mean over batch and pixels, so each pixel gradient is 2 d / (B * P).
    const double count = static_cast<double>(batch * npix);
    double loss = 0.0;
    Tensor seed_grads({batch, nseed});
    for (std::size_t b = 0; b < batch; ++b) {
        SampleTrace& tr = traces[b];
        const Tensor y = decoder_convs(p, seeds.data() + b * nseed, tr, dropout_rng);
        Tensor gy(y.shape());
        for (std::size_t i = 0; i < npix; ++i) {
            const double d = y[i] - targets[b][i];
            loss += d * d;
            gy[i] = 2.0 * d / count;
        }
        const Tensor ga5 = nn::relu_backward(tr.a5, gy);
        const Tensor gd4 = nn::conv2d_backward(tr.d4, p.dec_out, ga5, grads.dec_out);
        const Tensor ga4 = nn::relu_backward(tr.a4, unmask(gd4, tr.m4));
        const Tensor gd3 = nn::transpose_conv2d_backward(tr.d3, p.dec_tconv, ga4, grads.dec_tconv);
        const Tensor ga3 = nn::relu_backward(tr.a3, unmask(gd3, tr.m3));
        const Tensor gu0 = nn::conv2d_backward(tr.u0, p.dec_conv, ga3, grads.dec_conv);
        std::copy(gu0.data(), gu0.data() + nseed, seed_grads.data() + b * nseed);
    }
    const Tensor latent_grads = nn::dense_backward(latent, p.dec_fc, seed_grads, grads.dec_fc);
    const Tensor feature_grads = nn::dense_backward(features, p.enc_fc, latent_grads, grads.enc_fc);

    for (std::size_t b = 0; b < batch; ++b) {
        SampleTrace& tr = traces[b];
        Tensor gh2(tr.a2.shape(),
                   std::vector<double>(feature_grads.data() + b * nfeat,
                                       feature_grads.data() + (b + 1) * nfeat));
        const Tensor ga2 = nn::relu_backward(tr.a2, unmask(std::move(gh2), tr.m2));
        const Tensor gp1 = nn::conv2d_backward(tr.pool.output, p.enc_conv2, ga2, grads.enc_conv2);
        const Tensor gh1 = nn::maxpool2x2_backward(tr.h1, tr.pool, gp1);
        const Tensor ga1 = nn::relu_backward(tr.a1, unmask(gh1, tr.m1));
        nn::conv2d_backward(inputs[b], p.enc_conv1, ga1, grads.enc_conv1);
    }
    return loss / count;
}

double Autoencoder::loss(std::span<const Tensor> inputs, std::span<const Tensor> targets) const {
    require(!inputs.empty() && targets.size() == inputs.size(), Errc::shape_mismatch,
            "one target per input");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t b = 0; b < inputs.size(); ++b) {
        const Tensor y = reconstruct(inputs[b]);
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - targets[b][i];
            sum += d * d;
        }
        count += y.size();
    }
    return sum / static_cast<double>(count);
}

// ---- training -------------------------------------------------------------

double dataset_scale(std::span<const IntensityImage> targets) {
    require(!targets.empty(), Errc::empty_input, "no clean targets");
    double peak = 0.0;
    for (const auto& t : targets) {
        for (double v : t.values()) peak = std::max(peak, v);
    }
    require(peak > 0.0, Errc::zero_power, "clean targets are all zero");
    return peak;
}

Tensor to_tensor(std::span<const double> pixels, std::size_t side, double scale) {
    require(pixels.size() == side * side, Errc::shape_mismatch, "image is not side x side");
    require(scale > 0.0, Errc::invalid_argument, "scale must be > 0");
    std::vector<double> data(pixels.size());
    const double inv = 1.0 / scale;
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = pixels[i] * inv;
    return Tensor({1, side, side}, std::move(data));
}

GnnTrainResult train_gnn(const GnnTrainingSet& data, const GnnArchitecture& arch,
                         const GnnTrainConfig& config, const EpochCallback& on_epoch) {
    arch.validate();
    require(!data.inputs.empty(), Errc::empty_input, "training set is empty");
    require(data.target_of.size() == data.inputs.size(), Errc::shape_mismatch,
            "one target index per input");
    require(config.epochs >= 0 && config.batch_size >= 1, Errc::invalid_argument,
            "epochs must be >= 0 and batch size >= 1");
    require(config.lr > 0.0, Errc::invalid_argument, "learning rate must be > 0");
    const GridSpec& grid = data.inputs.front().grid();
    require(static_cast<std::size_t>(grid.n) == arch.image_side, Errc::shape_mismatch,
            "image side differs from architecture");
    for (const auto& in : data.inputs) {
        require(in.grid() == grid, Errc::grid_mismatch, "training images use different grids");
    }
    for (const auto t : data.target_of) {
        require(t < data.targets.size(), Errc::invalid_argument, "target index out of range");
    }

    const double scale = dataset_scale(data.targets);
    std::vector<Tensor> inputs;
    inputs.reserve(data.inputs.size());
    for (const auto& in : data.inputs) inputs.push_back(to_tensor(in.values(), arch.image_side, scale));
    std::vector<Tensor> targets;
    for (const auto& t : data.targets) targets.push_back(to_tensor(t.values(), arch.image_side, scale));

    Rng init_rng(derive_seed(config.seed, {0x1417}));
    Autoencoder net(GnnParams::init(arch, init_rng));
    GnnParams grads = net.params().zeros_like();
    auto param_blocks = net.params().blocks();
    auto grad_blocks = grads.blocks();
    nn::Adam optimiser({.lr = config.lr}, param_blocks);

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    GnnTrainResult result;
    result.loss_history.reserve(static_cast<std::size_t>(config.epochs));
    std::vector<Tensor> batch_in, batch_target;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed(config.seed, {0x5afe, static_cast<std::uint64_t>(epoch)}));
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }
        Rng dropout_rng(derive_seed(config.seed, {0xd209, static_cast<std::uint64_t>(epoch)}));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            batch_in.clear();
            batch_target.clear();
            for (std::size_t k = start; k < stop; ++k) {
                batch_in.push_back(inputs[order[k]]);
                batch_target.push_back(targets[data.target_of[order[k]]]);
            }
            for (auto& g : grad_blocks) std::fill(g.values.begin(), g.values.end(), 0.0);
            const double loss = net.loss_and_grad(batch_in, batch_target, grads, &dropout_rng);
            require(std::isfinite(loss), Errc::non_finite,
                    "autoencoder loss became non-finite at epoch " + std::to_string(epoch));
            optimiser.step(param_blocks, grad_blocks);
            epoch_loss += loss * static_cast<double>(stop - start);
        }
        epoch_loss /= static_cast<double>(order.size());
        result.loss_history.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch, epoch_loss);
    }
    require(net.params().all_finite(), Errc::non_finite, "autoencoder weights became non-finite");
    result.model = GnnModel{std::move(net.params()), scale};
    return result;
}

IntensityImage reconstruct(const NoisyRaster& image, const GnnModel& model) {
    require(model.params.all_finite(), Errc::non_finite, "autoencoder parameters are not finite");
    const auto side = model.params.arch.image_side;
    require(static_cast<std::size_t>(image.side()) == side, Errc::shape_mismatch,
            "image side differs from architecture");
    // Parameters are copied once per call; the network is small next to the image work.
    const Autoencoder net(model.params);
    const Tensor out = net.reconstruct(to_tensor(image.values(), side, model.scale));
    std::vector<double> pixels(out.size());
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = out[i] * model.scale;
    return IntensityImage(image.grid(), std::move(pixels));
}

}  // namespace oamfso::gnn
