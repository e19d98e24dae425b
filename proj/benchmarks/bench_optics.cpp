#include <benchmark/benchmark.h>

#include "oamfso/channel.hpp"
#include "oamfso/field_optics.hpp"
#include "oamfso/turbulence.hpp"

namespace {

using namespace oamfso;

void BM_Propagate(benchmark::State& state) {
    const GridSpec grid{.n = static_cast<int>(state.range(0)), .pitch = 3.5e-3 * 128.0 / static_cast<double>(state.range(0))};
    const auto field = optics::gaussian_beam(grid, 0.04);
    const auto transfer = optics::fresnel_transfer(grid, 1.0);
    for (auto _ : state) {
        auto f = field;
        optics::apply_transfer(f, transfer);
        benchmark::DoNotOptimize(f.values().data());
    }
}
BENCHMARK(BM_Propagate)->Arg(128)->Arg(256);

void BM_PhaseScreen(benchmark::State& state) {
    const GridSpec grid{};
    const auto amp = turbulence::screen_amplitudes(grid, {}, grid.wavelength);
    Rng rng(1);
    for (auto _ : state) benchmark::DoNotOptimize(turbulence::phase_screen(grid, amp, rng));
}
BENCHMARK(BM_PhaseScreen);

void BM_TurbulentImage(benchmark::State& state) {
    const channel::Channel ch(channel::ChannelConfig{});
    const GridSpec grid{};
    Rng rng(2);
    const auto screen = turbulence::phase_screen(grid, {}, grid.wavelength, rng);
    for (auto _ : state) benchmark::DoNotOptimize(ch.turbulent_image(channel::Symbol(7), screen, 50.0, rng));
}
BENCHMARK(BM_TurbulentImage);

}  // namespace
