#include "oamfso/field_optics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <sstream>

#include "oamfso/fft.hpp"

namespace oamfso {

void GridSpec::validate() const {
    require(n >= 8 && (n & (n - 1)) == 0, Errc::invalid_argument,
            "grid size must be a power of two >= 8");
    require(pitch > 0.0 && std::isfinite(pitch), Errc::invalid_argument, "pitch must be > 0");
    require(wavelength > 0.0 && std::isfinite(wavelength), Errc::invalid_argument,
            "wavelength must be > 0");
}

double GridSpec::kappa_step() const noexcept { return 2.0 * std::numbers::pi / extent(); }

double GridSpec::kappa(int index) const noexcept {
    const int signed_index = index < n / 2 ? index : index - n;
    return signed_index * kappa_step();
}

double GridSpec::wavenumber() const noexcept { return 2.0 * std::numbers::pi / wavelength; }

}  // namespace oamfso

namespace oamfso::optics {
namespace {

void require_same_grid(const GridSpec& a, const GridSpec& b) {
    require(a == b, Errc::grid_mismatch, "operands live on different grids");
}

}  // namespace

ComplexField gaussian_beam(const GridSpec& grid, double w0) {
    grid.validate();
    require(w0 > 0.0, Errc::invalid_argument, "beam waist must be > 0");
    require(2.0 * w0 < grid.extent(), Errc::beam_too_large, "beam diameter exceeds grid extent");
    ComplexField field(grid);
    const double inv_w2 = 1.0 / (w0 * w0);
    for (int row = 0; row < grid.n; ++row) {
        const double y = grid.coord(row);
        for (int col = 0; col < grid.n; ++col) {
            const double x = grid.coord(col);
            field(row, col) = std::exp(-(x * x + y * y) * inv_w2);
        }
    }
    return field;
}

double factorial(int value) {
    value = std::abs(value);
    double result = 1.0;
    for (int i = 2; i <= value; ++i) result *= i;
    return result;
}

double superposition_weight(double r, int l1, int l2, double w0) {
    const int a1 = std::abs(l1);
    const int a2 = std::abs(l2);
    const double ratio = std::sqrt(factorial(a1) / factorial(a2));
    // pow(0, 0) == 1 keeps the equal-order case finite at the origin.
    return ratio * std::pow(r * std::numbers::sqrt2 / w0, a2 - a1);
}

PhaseScreen superposition_phase_mask(const GridSpec& grid, int l1, int l2, double w0) {
    grid.validate();
    require(std::abs(l1) <= 20 && std::abs(l2) <= 20, Errc::invalid_argument,
            "OAM orders beyond |l| = 20 leave the factorial range");
    require(w0 > 0.0, Errc::invalid_argument, "beam waist must be > 0");
    PhaseScreen mask(grid);
    for (int row = 0; row < grid.n; ++row) {
        const double y = grid.coord(row);
        for (int col = 0; col < grid.n; ++col) {
            const double x = grid.coord(col);
            const double r = std::hypot(x, y);
            const double phi = (row == grid.n / 2 && col == grid.n / 2) ? 0.0 : std::atan2(y, x);
            const Complex sum = std::polar(1.0, -l1 * phi) +
                                superposition_weight(r, l1, l2, w0) * std::polar(1.0, -l2 * phi);
            double theta = std::arg(sum);
            // arg() may return -pi for a negative real sum; fold into (-pi, pi].
            if (theta <= -std::numbers::pi) theta += 2.0 * std::numbers::pi;
            mask(row, col) = theta;
        }
    }
    return mask;
}

ComplexField apply_phase(const ComplexField& field, const PhaseScreen& mask) {
    require_same_grid(field.grid(), mask.grid());
    ComplexField out(field.grid());
    for (std::size_t i = 0; i < field.size(); ++i) {
        const double phase = mask[i];
        out[i] = phase == 0.0 ? field[i] : field[i] * std::polar(1.0, phase);
    }
    return out;
}

bool sampling_ok(const GridSpec& grid, double z) noexcept {
    return grid.pitch >= grid.wavelength * z / grid.extent();
}

std::vector<Complex> fresnel_transfer(const GridSpec& grid, double z) {
    grid.validate();
    require(z >= 0.0 && std::isfinite(z), Errc::invalid_argument, "distance must be >= 0");
    if (!sampling_ok(grid, z)) {
        std::ostringstream msg;
        msg << "pitch " << grid.pitch << " m is below lambda*z/(n*pitch) = "
            << grid.wavelength * z / grid.extent() << " m at z = " << z << " m";
        throw Error(Errc::sampling_violation, msg.str());
    }
    std::vector<Complex> transfer(grid.pixels());
    const double factor = z / (2.0 * grid.wavenumber());
    for (int row = 0; row < grid.n; ++row) {
        const double ky = grid.kappa(row);
        for (int col = 0; col < grid.n; ++col) {
            const double kx = grid.kappa(col);
            transfer[static_cast<std::size_t>(row) * grid.n + col] =
                std::polar(1.0, -(kx * kx + ky * ky) * factor);
        }
    }
    return transfer;
}

void apply_transfer(ComplexField& field, const std::vector<Complex>& transfer) {
    require(transfer.size() == field.size(), Errc::grid_mismatch,
            "transfer function does not match field grid");
    auto values = field.values();
    fft::forward(values, field.side());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] *= transfer[i];
    fft::inverse(values, field.side());
}

ComplexField propagate(const ComplexField& field, double z) {
    const auto transfer = fresnel_transfer(field.grid(), z);
    ComplexField out = field;
    apply_transfer(out, transfer);
    return out;
}

IntensityImage intensity(const ComplexField& field) {
    IntensityImage out(field.grid());
    for (std::size_t i = 0; i < field.size(); ++i) out[i] = std::norm(field[i]);
    return out;
}

double total_power(const ComplexField& field) noexcept {
    double sum = 0.0;
    for (const auto& a : field.values()) sum += std::norm(a);
    return sum;
}

ComplexField normalize_power(const ComplexField& field, double target) {
    require(target > 0.0 && std::isfinite(target), Errc::invalid_argument,
            "target power must be > 0");
    const double power = total_power(field);
    require(power > 0.0 && std::isfinite(power), Errc::zero_power, "field carries no power");
    const double gain = std::sqrt(target / power);
    ComplexField out = field;
    for (auto& a : out.values()) a *= gain;
    return out;
}

double second_moment_radius(const IntensityImage& image) {
    const auto& grid = image.grid();
    double total = 0.0, mx = 0.0, my = 0.0;
    for (int row = 0; row < grid.n; ++row) {
        for (int col = 0; col < grid.n; ++col) {
            const double v = image(row, col);
            total += v;
            mx += v * grid.coord(col);
            my += v * grid.coord(row);
        }
    }
    require(total > 0.0, Errc::zero_power, "image carries no power");
    mx /= total;
    my /= total;
    double r2 = 0.0;
    for (int row = 0; row < grid.n; ++row) {
        const double dy = grid.coord(row) - my;
        for (int col = 0; col < grid.n; ++col) {
            const double dx = grid.coord(col) - mx;
            r2 += image(row, col) * (dx * dx + dy * dy);
        }
    }
    return std::sqrt(2.0 * r2 / total);
}

int count_lobes(const IntensityImage& image, double fraction) {
    const int n = image.side();
    const auto values = image.values();
    const double peak = *std::max_element(values.begin(), values.end());
    if (!(peak > 0.0)) return 0;
    const double threshold = fraction * peak;
    std::vector<char> visited(values.size(), 0);
    std::vector<int> stack;
    int lobes = 0;
    for (int start = 0; start < static_cast<int>(values.size()); ++start) {
        if (visited[start] || values[start] <= threshold) continue;
        ++lobes;
        visited[start] = 1;
        stack.push_back(start);
        while (!stack.empty()) {
            const int idx = stack.back();
            stack.pop_back();
            const int row = idx / n;
            const int col = idx % n;
            const int neighbours[4][2] = {{row - 1, col}, {row + 1, col}, {row, col - 1}, {row, col + 1}};
            for (const auto& [r, c] : neighbours) {
                if (r < 0 || r >= n || c < 0 || c >= n) continue;
                const int next = r * n + c;
                if (!visited[next] && values[next] > threshold) {
                    visited[next] = 1;
                    stack.push_back(next);
                }
            }
        }
    }
    return lobes;
}

}  // namespace oamfso::optics
