#include <benchmark/benchmark.h>

#include "oamfso/autoencoder.hpp"
#include "oamfso/demodulator.hpp"
#include "oamfso/nn/adam.hpp"
#include "oamfso/nn/layers.hpp"

namespace {

using namespace oamfso;

nn::Tensor random_tensor(nn::Shape shape, Rng& rng) {
    nn::Tensor t(std::move(shape));
    for (auto& v : t.values()) v = rng.normal();
    return t;
}

void BM_Conv2d(benchmark::State& state) {
    Rng rng(1);
    const auto side = static_cast<std::size_t>(state.range(0));
    const auto layer = nn::ConvLayer::he_normal(3, 3, 1, 3, rng);
    const auto x = random_tensor({3, side, side}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d(x, layer));
}
BENCHMARK(BM_Conv2d)->Arg(64)->Arg(128);

void BM_Conv2dBackward(benchmark::State& state) {
    Rng rng(2);
    const auto layer = nn::ConvLayer::he_normal(3, 3, 1, 3, rng);
    const auto x = random_tensor({3, 64, 64}, rng);
    const auto gy = random_tensor({3, 64, 64}, rng);
    auto grads = layer.zeros_like();
    for (auto _ : state) benchmark::DoNotOptimize(nn::conv2d_backward(x, layer, gy, grads));
}
BENCHMARK(BM_Conv2dBackward);

void BM_TransposeConv2d(benchmark::State& state) {
    Rng rng(3);
    const auto layer = nn::ConvLayer::he_normal(3, 3, 2, 3, rng);
    const auto x = random_tensor({3, 64, 64}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(nn::transpose_conv2d(x, layer, 128, 128));
}
BENCHMARK(BM_TransposeConv2d);

void BM_DecoderDense(benchmark::State& state) {
    Rng rng(4);
    const auto layer = nn::DenseLayer::he_normal(1024, 64 * 64 * 3, rng);
    const auto x = random_tensor({static_cast<std::size_t>(state.range(0)), 1024}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(nn::dense(x, layer));
}
BENCHMARK(BM_DecoderDense)->Arg(1)->Arg(11)->Unit(benchmark::kMillisecond);

void BM_DecoderDenseBackward(benchmark::State& state) {
    Rng rng(4);
    const auto layer = nn::DenseLayer::he_normal(1024, 64 * 64 * 3, rng);
    const auto x = random_tensor({11, 1024}, rng);
    const auto gy = random_tensor({11, 64 * 64 * 3}, rng);
    auto grads = layer.zeros_like();
    for (auto _ : state) benchmark::DoNotOptimize(nn::dense_backward(x, layer, gy, grads));
}
BENCHMARK(BM_DecoderDenseBackward)->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
    std::vector<double> p(1 << 20, 1.0), g(1 << 20, 0.1);
    nn::AdamState s(p.size());
    for (auto _ : state) nn::adam_step(p, g, s, {});
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(p.size()));
}
BENCHMARK(BM_AdamStep);

void BM_GnnTrainStep(benchmark::State& state) {
    Rng rng(5);
    const gnn::Autoencoder ae(gnn::GnnParams::init({}, rng));
    std::vector<nn::Tensor> in, tg;
    for (int i = 0; i < 11; ++i) {
        in.push_back(random_tensor({1, 128, 128}, rng));
        tg.push_back(random_tensor({1, 128, 128}, rng));
    }
    auto grads = ae.params().zeros_like();
    Rng drop(6);
    for (auto _ : state) benchmark::DoNotOptimize(ae.loss_and_grad(in, tg, grads, &drop));
}
BENCHMARK(BM_GnnTrainStep)->Unit(benchmark::kMillisecond);

void BM_CnnForward(benchmark::State& state) {
    Rng rng(7);
    const auto p = cnn::CnnParams::init({}, rng);
    const auto x = random_tensor({1, 128, 128}, rng);
    for (auto _ : state) benchmark::DoNotOptimize(cnn::cnn_forward(x, p));
}
BENCHMARK(BM_CnnForward);

}  // namespace
