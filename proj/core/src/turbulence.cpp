#include "oamfso/turbulence.hpp"

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "oamfso/fft.hpp"

namespace oamfso::turbulence {

void TurbulenceParams::validate() const {
    require(cn2 >= 1e-17 && cn2 <= 1e-11, Errc::invalid_argument,
            "cn2 must lie in [1e-17, 1e-11] m^-2/3");
    require(l_min > 0.0, Errc::invalid_argument, "inner scale must be > 0");
    require(l_max > l_min, Errc::invalid_argument, "outer scale must exceed inner scale");
    require(z > 0.0, Errc::invalid_argument, "path length must be > 0");
}

double TurbulenceParams::kappa_0() const noexcept { return 2.0 * std::numbers::pi / l_max; }

FriedParameter fried_parameter(const TurbulenceParams& params, double wavelength) {
    params.validate();
    require(wavelength > 0.0, Errc::invalid_argument, "wavelength must be > 0");
    const double k = 2.0 * std::numbers::pi / wavelength;
    return {std::pow(0.423 * k * k * params.cn2 * params.z, -3.0 / 5.0)};
}

double von_karman_psd(double kappa, double r0, const TurbulenceParams& params) {
    require(kappa >= 0.0, Errc::invalid_argument, "spatial frequency must be >= 0");
    const double k2 = kappa * kappa;
    const double k0 = params.kappa_0();
    const double km = params.kappa_m();
    return 0.023 * std::pow(r0, -5.0 / 3.0) * std::pow(k2 + k0 * k0, -11.0 / 6.0) *
           std::exp(-k2 / (km * km));
}

std::vector<double> screen_amplitudes(const GridSpec& grid, const TurbulenceParams& params,
                                      double wavelength) {
    grid.validate();
    const double r0 = fried_parameter(params, wavelength).r0;
    const double n2 = static_cast<double>(grid.n) * grid.n;
    const double bin_scale = grid.kappa_step() * n2 * kScreenGain;
    std::vector<double> amplitudes(grid.pixels());
    for (int row = 0; row < grid.n; ++row) {
        const double ky = grid.kappa(row);
        for (int col = 0; col < grid.n; ++col) {
            const double kx = grid.kappa(col);
            amplitudes[static_cast<std::size_t>(row) * grid.n + col] =
                std::sqrt(von_karman_psd(std::hypot(kx, ky), r0, params)) * bin_scale;
        }
    }
    amplitudes[0] = 0.0;
    return amplitudes;
}

PhaseScreen phase_screen(const GridSpec& grid, std::span<const double> amplitudes, Rng& rng) {
    require(amplitudes.size() == grid.pixels(), Errc::shape_mismatch,
            "amplitude table does not match grid");
    std::vector<Complex> spectrum(grid.pixels());
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        const double re = rng.normal();
        const double im = rng.normal();
        spectrum[i] = Complex(re, im) * (std::numbers::sqrt2 / 2.0 * amplitudes[i]);
    }
    fft::inverse(spectrum, grid.n);
    PhaseScreen screen(grid);
    for (std::size_t i = 0; i < spectrum.size(); ++i) screen[i] = spectrum[i].real();
    return screen;
}

PhaseScreen phase_screen(const GridSpec& grid, const TurbulenceParams& params, double wavelength,
                         Rng& rng) {
    const auto amplitudes = screen_amplitudes(grid, params, wavelength);
    return phase_screen(grid, amplitudes, rng);
}

std::vector<StructureSample> structure_function(std::span<const PhaseScreen> screens,
                                                std::span<const PixelOffset> offsets) {
    require(screens.size() >= 2, Errc::empty_input, "structure function needs >= 2 screens");
    require(!offsets.empty(), Errc::empty_input, "no separations requested");
    const GridSpec& grid = screens.front().grid();
    for (const auto& s : screens) {
        require(s.grid() == grid, Errc::grid_mismatch, "screens live on different grids");
    }
    const int n = grid.n;
    std::vector<StructureSample> out;
    out.reserve(offsets.size());
    for (const auto& off : offsets) {
        require(std::abs(off.rows) < n && std::abs(off.cols) < n && (off.rows != 0 || off.cols != 0),
                Errc::invalid_argument, "separation must be non-zero and inside the grid");
        const int r_begin = std::max(0, -off.rows), r_end = std::min(n, n - off.rows);
        const int c_begin = std::max(0, -off.cols), c_end = std::min(n, n - off.cols);
        double sum = 0.0;
        std::size_t pairs = 0;
        for (const auto& screen : screens) {
            for (int row = r_begin; row < r_end; ++row) {
                for (int col = c_begin; col < c_end; ++col) {
                    const double d = screen(row + off.rows, col + off.cols) - screen(row, col);
                    sum += d * d;
                }
            }
            pairs += static_cast<std::size_t>(r_end - r_begin) * static_cast<std::size_t>(c_end - c_begin);
        }
        out.push_back({off, grid.pitch * std::hypot(off.rows, off.cols), sum / pairs, pairs});
    }
    return out;
}

double kolmogorov_structure(double separation, double r0) noexcept {
    return 6.88 * std::pow(separation / r0, 5.0 / 3.0);
}

}  // namespace oamfso::turbulence
