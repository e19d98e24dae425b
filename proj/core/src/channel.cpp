#include "oamfso/channel.hpp"

#include <cmath>

namespace oamfso::channel {

void ChannelConfig::validate() const {
    grid.validate();
    turbulence.validate();
    require(w0 > 0.0, Errc::invalid_argument, "beam waist must be > 0");
    require(slm_to_screen == 1.0, Errc::invalid_argument, "turbulence plane sits 1 m after the SLM");
    require(z >= 200.0, Errc::invalid_argument, "receiver distance must be >= 200 m");
    require(tx_power > 0.0, Errc::invalid_argument, "transmit power must be > 0");
}

double snr_signal_level() noexcept {
    return kSnrReferenceSigma * std::pow(10.0, kSnrReferenceDb / 10.0);
}

double measure_snr(double sigma, double signal_level) {
    require(sigma >= 0.0 && std::isfinite(sigma), Errc::invalid_argument, "sigma must be >= 0");
    if (sigma == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(signal_level / sigma);
}

NoisyImage add_dark_noise(const IntensityImage& image, double sigma, Rng& rng) {
    require(sigma >= 0.0, Errc::invalid_argument, "sigma must be >= 0");
    std::vector<double> pixels(image.values().begin(), image.values().end());
    if (sigma > 0.0) {
        for (auto& p : pixels) p += sigma * rng.normal();
    }
    return {NoisyRaster(image.grid(), std::move(pixels)), sigma, measure_snr(sigma)};
}

Channel::Channel(const ChannelConfig& config) : config_(config) {
    config_.validate();
    gaussian_ = optics::normalize_power(optics::gaussian_beam(config_.grid, config_.w0),
                                        config_.tx_power);
    for (int ell = 0; ell < kNumSymbols; ++ell) {
        masks_[ell] = optics::superposition_phase_mask(config_.grid, ell, -ell, config_.w0);
    }
    to_screen_ = optics::fresnel_transfer(config_.grid, config_.slm_to_screen);
    to_receiver_ = optics::fresnel_transfer(config_.grid, config_.z);
    full_path_ = optics::fresnel_transfer(config_.grid, config_.slm_to_screen + config_.z);
}

ComplexField Channel::transmitted_field(Symbol sym) const {
    return optics::apply_phase(gaussian_, masks_[sym.ell()]);
}

IntensityImage Channel::clean_image(Symbol sym) const {
    ComplexField field = transmitted_field(sym);
    optics::apply_transfer(field, full_path_);
    return optics::intensity(field);
}

IntensityImage Channel::turbulent_intensity(Symbol sym, const PhaseScreen& screen) const {
    require(screen.grid() == config_.grid, Errc::grid_mismatch,
            "phase screen grid differs from channel grid");
    ComplexField field = transmitted_field(sym);
    optics::apply_transfer(field, to_screen_);
    field = optics::apply_phase(field, screen);
    optics::apply_transfer(field, to_receiver_);
    return optics::intensity(field);
}

NoisyImage Channel::turbulent_image(Symbol sym, const PhaseScreen& screen, double sigma,
                                    Rng& rng) const {
    return add_dark_noise(turbulent_intensity(sym, screen), sigma, rng);
}

IntensityImage clean_receiver_image(Symbol sym, const ChannelConfig& config) {
    return Channel(config).clean_image(sym);
}

NoisyImage turbulent_receiver_image(Symbol sym, const PhaseScreen& screen, double sigma,
                                    const ChannelConfig& config, Rng& rng) {
    return Channel(config).turbulent_image(sym, screen, sigma, rng);
}

}  // namespace oamfso::channel
