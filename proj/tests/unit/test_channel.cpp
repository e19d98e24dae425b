#include <gtest/gtest.h>

#include <cmath>

#include "oamfso/channel.hpp"
#include "oamfso/field_optics.hpp"

namespace oamfso::channel {
namespace {

const ChannelConfig kCfg{};

double sum(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
}

TEST(Symbol, Range) {
    EXPECT_THROW(Symbol(11), Error);
    EXPECT_THROW(Symbol(-1), Error);
    EXPECT_EQ(Symbol(10).ell(), 10);
}

TEST(ChannelConfig, Validation) {
    EXPECT_THROW((ChannelConfig{.z = 150.0}).validate(), Error);
    EXPECT_THROW((ChannelConfig{.slm_to_screen = 2.0}).validate(), Error);
    EXPECT_THROW((ChannelConfig{.tx_power = 0.0}).validate(), Error);
    EXPECT_NO_THROW(kCfg.validate());
}

TEST(CleanImage, GaussianSingleLobe) {
    EXPECT_EQ(optics::count_lobes(clean_receiver_image(Symbol(0), kCfg)), 1);
}

TEST(CleanImage, TwentyPetalsAtTen) {
    EXPECT_EQ(optics::count_lobes(clean_receiver_image(Symbol(10), kCfg)), 20);
}

TEST(CleanImage, PowerBudget) {
    for (int ell = 0; ell < kNumSymbols; ++ell) {
        const double p = sum(clean_receiver_image(Symbol(ell), kCfg).values());
        EXPECT_GE(p, 0.99 * kCfg.tx_power) << ell;
        EXPECT_LE(p, 1.0 * kCfg.tx_power * (1 + 1e-12)) << ell;
    }
}

TEST(CleanImage, Deterministic) {
    EXPECT_EQ(clean_receiver_image(Symbol(6), kCfg), clean_receiver_image(Symbol(6), kCfg));
}

TEST(TurbulentImage, FlatScreenMatchesCleanImage) {
    Rng rng(1);
    const auto clean = clean_receiver_image(Symbol(5), kCfg);
    const auto got = turbulent_receiver_image(Symbol(5), PhaseScreen(kCfg.grid), 0.0, kCfg, rng);
    const double peak = *std::max_element(clean.values().begin(), clean.values().end());
    for (std::size_t i = 0; i < clean.size(); ++i) EXPECT_NEAR(got.pixels[i], clean[i], 1e-6 * peak);
}

TEST(TurbulentImage, ScreenConservesPower) {
    Rng rng(2);
    PhaseScreen screen(kCfg.grid);
    for (auto& v : screen.values()) v = 2.0 * rng.normal();
    for (int ell : {0, 4, 9}) {
        const double p = sum(turbulent_receiver_image(Symbol(ell), screen, 0.0, kCfg, rng).pixels.values());
        EXPECT_NEAR(p / kCfg.tx_power, 1.0, 0.01) << ell;
    }
}

TEST(TurbulentImage, BorderNoiseVariance) {
    Rng rng(3);
    const auto img = turbulent_receiver_image(Symbol(2), PhaseScreen(kCfg.grid), 50.0, kCfg, rng);
    const auto clean = clean_receiver_image(Symbol(2), kCfg);
    const int n = kCfg.grid.n;
    double s = 0.0, s2 = 0.0;
    int count = 0;
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            if (r >= 16 && r < n - 16 && c >= 16 && c < n - 16) continue;
            const double d = img.pixels(r, c) - clean(r, c);
            s += d;
            s2 += d * d;
            ++count;
        }
    }
    const double var = s2 / count - (s / count) * (s / count);
    EXPECT_GT(var, 0.9 * 2500.0);
    EXPECT_LT(var, 1.1 * 2500.0);
    EXPECT_EQ(img.sigma, 50.0);
}

TEST(DarkNoise, UnbiasedAndUnclipped) {
    const auto clean = clean_receiver_image(Symbol(1), kCfg);
    Rng rng(4);
    const int draws = 10000;
    const std::size_t probe = static_cast<std::size_t>(64 * 128 + 64);
    double mean = 0.0;
    bool saw_negative = false;
    for (int i = 0; i < draws; ++i) {
        const auto noisy = add_dark_noise(clean, 20.0, rng);
        mean += noisy.pixels[probe] / draws;
        saw_negative = saw_negative || noisy.pixels[0] < 0.0;
    }
    EXPECT_LT(std::abs(mean - clean[probe]), 3.0 * 20.0 / std::sqrt(draws));
    EXPECT_TRUE(saw_negative);
}

TEST(Snr, CalibrationAnchors) {
    EXPECT_NEAR(measure_snr(50.0), -3.87, 1e-12);
    EXPECT_NEAR(measure_snr(20.0), 0.11, 0.05);
    EXPECT_NEAR(measure_snr(80.0), -5.91, 0.05);
    EXPECT_NEAR(measure_snr(10.0), 0.11 + 10.0 * std::log10(2.0), 0.05);
    EXPECT_NEAR(snr_signal_level(), 20.51, 0.01);
    EXPECT_TRUE(std::isinf(measure_snr(0.0)));
}

TEST(Snr, DifferenceLaw) {
    for (double a : {3.0, 20.0, 50.0}) {
        for (double b : {7.0, 80.0}) {
            EXPECT_NEAR(measure_snr(a) - measure_snr(b), 10.0 * std::log10(b / a), 1e-12);
        }
    }
    EXPECT_NEAR(measure_snr(20.0) - measure_snr(50.0), 3.98, 0.01);
    EXPECT_NEAR(measure_snr(50.0) - measure_snr(80.0), 2.04, 0.01);
}

}  // namespace
}  // namespace oamfso::channel
