#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "oamfso/error.hpp"

namespace oamfso {

using Complex = std::complex<double>;

/// Square sampling grid shared by every optical plane.
///
/// Pixel (row, col) sits at physical coordinates
/// x = (col - n/2) * pitch, y = (row - n/2) * pitch, so the grid centre is
/// pixel (n/2, n/2) and even grids are symmetric up to one extra column/row
/// on the negative side.
struct GridSpec {
    int n = 128;
    double pitch = 3.5e-3;       // metres per pixel
    double wavelength = 1550e-9; // metres

    void validate() const;

    [[nodiscard]] double extent() const noexcept { return n * pitch; }
    [[nodiscard]] double coord(int index) const noexcept { return (index - n / 2) * pitch; }
    [[nodiscard]] std::size_t pixels() const noexcept {
        return static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    }
    /// Spacing of the FFT angular-frequency lattice, 2*pi / (n * pitch).
    [[nodiscard]] double kappa_step() const noexcept;
    /// Angular frequency of FFT bin `index` (negative frequencies above n/2).
    [[nodiscard]] double kappa(int index) const noexcept;
    [[nodiscard]] double wavenumber() const noexcept;

    friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Row-major n x n array bound to a grid. The tag makes fields, phase screens
/// and intensity images distinct types even though some share a value type.
template <class T, class Tag>
class Raster {
public:
    using value_type = T;

    Raster() = default;
    explicit Raster(const GridSpec& grid, T fill = T{})
        : grid_(grid), values_(grid.pixels(), fill) {}
    Raster(const GridSpec& grid, std::vector<T> values) : grid_(grid), values_(std::move(values)) {
        require(values_.size() == grid_.pixels(), Errc::shape_mismatch,
                "raster payload does not match grid size");
    }

    [[nodiscard]] const GridSpec& grid() const noexcept { return grid_; }
    [[nodiscard]] int side() const noexcept { return grid_.n; }
    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }

    T& operator()(int row, int col) noexcept { return values_[index(row, col)]; }
    const T& operator()(int row, int col) const noexcept { return values_[index(row, col)]; }
    T& operator[](std::size_t i) noexcept { return values_[i]; }
    const T& operator[](std::size_t i) const noexcept { return values_[i]; }

    [[nodiscard]] std::span<T> values() noexcept { return values_; }
    [[nodiscard]] std::span<const T> values() const noexcept { return values_; }
    [[nodiscard]] const std::vector<T>& vector() const noexcept { return values_; }
    std::vector<T> release() && { return std::move(values_); }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    [[nodiscard]] std::size_t index(int row, int col) const noexcept {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(grid_.n) +
               static_cast<std::size_t>(col);
    }

    GridSpec grid_{};
    std::vector<T> values_;
};

struct FieldTag;
struct PhaseTag;
struct IntensityTag;
struct NoisyTag;

/// Complex field amplitude, one value per pixel.
using ComplexField = Raster<Complex, FieldTag>;
/// Real phase in radians (SLM masks and turbulence screens).
using PhaseScreen = Raster<double, PhaseTag>;
/// Noise-free intensity |field|^2; never negative.
using IntensityImage = Raster<double, IntensityTag>;
/// Receiver raster after dark noise; may hold negative values.
using NoisyRaster = Raster<double, NoisyTag>;

}  // namespace oamfso
