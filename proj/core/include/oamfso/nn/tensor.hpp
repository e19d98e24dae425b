#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "oamfso/error.hpp"

namespace oamfso::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t element_count(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense float64 array. Images are stored channel-major: {C, H, W}.
/// Batched vectors for the dense layers are {B, N}.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(element_count(shape_), fill) {}
    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        require(data_.size() == element_count(shape_), Errc::shape_mismatch,
                "tensor payload does not match shape " + shape_string(shape_));
    }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }

    double& operator[](std::size_t i) noexcept { return data_[i]; }
    double operator[](std::size_t i) const noexcept { return data_[i]; }
    [[nodiscard]] double* data() noexcept { return data_.data(); }
    [[nodiscard]] const double* data() const noexcept { return data_.data(); }
    [[nodiscard]] std::span<double> values() noexcept { return data_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return data_; }

    /// Same data under a new shape with the same element count.
    [[nodiscard]] Tensor reshaped(Shape shape) const& {
        return Tensor(std::move(shape), data_);
    }
    [[nodiscard]] Tensor reshaped(Shape shape) && {
        return Tensor(std::move(shape), std::move(data_));
    }

    void fill(double value) { std::fill(data_.begin(), data_.end(), value); }
    [[nodiscard]] bool all_finite() const noexcept;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace oamfso::nn
