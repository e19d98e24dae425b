#pragma once

#include <array>
#include <limits>
#include <vector>

#include "oamfso/field_optics.hpp"
#include "oamfso/raster.hpp"
#include "oamfso/rng.hpp"
#include "oamfso/turbulence.hpp"

namespace oamfso::channel {

inline constexpr int kNumSymbols = 11;

/// Transmitted letter: the superposition of OAM orders +ell and -ell
/// (ell = 0 is the plain Gaussian).
class Symbol {
public:
    constexpr Symbol() = default;
    explicit Symbol(int ell) : ell_(ell) {
        require(ell >= 0 && ell < kNumSymbols, Errc::invalid_argument, "symbol must lie in [0, 10]");
    }
    [[nodiscard]] constexpr int ell() const noexcept { return ell_; }
    friend constexpr bool operator==(Symbol, Symbol) = default;

private:
    int ell_ = 0;
};

struct ChannelConfig {
    GridSpec grid{};
    double w0 = 0.04;            // m
    double slm_to_screen = 1.0;  // m
    double z = 500.0;            // screen to receiver, m
    turbulence::TurbulenceParams turbulence{};
    double tx_power = optics::kTransmitPower;

    void validate() const;
};

struct NoisyImage {
    NoisyRaster pixels;
    double sigma = 0.0;
    double snr_db = std::numeric_limits<double>::infinity();
};

/// Mean signal level that places sigma = 50 at -3.87 dB.
inline constexpr double kSnrReferenceSigma = 50.0;
inline constexpr double kSnrReferenceDb = -3.87;
double snr_signal_level() noexcept;

/// 10 log10(level / sigma); +inf for sigma == 0.
double measure_snr(double sigma, double signal_level = snr_signal_level());

/// Adds i.i.d. N(0, sigma^2) to each pixel (no clipping).
NoisyImage add_dark_noise(const IntensityImage& image, double sigma, Rng& rng);

/// Precomputed transmitter and transfer functions for one configuration.
/// Immutable after construction; safe to share across threads.
class Channel {
public:
    explicit Channel(const ChannelConfig& config);

    [[nodiscard]] const ChannelConfig& config() const noexcept { return config_; }

    /// Normalised Gaussian times the SLM mask for `sym`.
    [[nodiscard]] ComplexField transmitted_field(Symbol sym) const;

    [[nodiscard]] IntensityImage clean_image(Symbol sym) const;

    /// Intensity after SLM -> 1 m -> screen -> z, before noise.
    [[nodiscard]] IntensityImage turbulent_intensity(Symbol sym, const PhaseScreen& screen) const;

    [[nodiscard]] NoisyImage turbulent_image(Symbol sym, const PhaseScreen& screen, double sigma,
                                             Rng& rng) const;

private:
    ChannelConfig config_;
    ComplexField gaussian_;
    std::array<PhaseScreen, kNumSymbols> masks_;
    std::vector<Complex> to_screen_;
    std::vector<Complex> to_receiver_;
    std::vector<Complex> full_path_;
};

IntensityImage clean_receiver_image(Symbol sym, const ChannelConfig& config);

NoisyImage turbulent_receiver_image(Symbol sym, const PhaseScreen& screen, double sigma,
                                    const ChannelConfig& config, Rng& rng);

}  // namespace oamfso::channel
