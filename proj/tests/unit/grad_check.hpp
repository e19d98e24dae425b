#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>

#include "oamfso/nn/tensor.hpp"
#include "oamfso/rng.hpp"

namespace oamfso::test {

inline double rel_err(double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
    return std::abs(analytic - numeric) / scale;
}

/// Worst relative error between `analytic` and central differences of `loss`
/// over every entry of `values` (h = 1e-5).
inline double worst_fd_error(std::span<double> values, std::span<const double> analytic,
                             const std::function<double()>& loss, double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = loss();
        values[i] = saved - h;
        const double down = loss();
        values[i] = saved;
        worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
    return worst;
}

/// Same check for the loss sum(forward()^2)/2. The central difference is
/// accumulated as sum((u - d)(u + d))/2 so untouched outputs cancel exactly.
inline double worst_fd_error_sq(std::span<double> values, std::span<const double> analytic,
                                const std::function<nn::Tensor()>& forward, double h = 1e-5) {
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const nn::Tensor up = forward();
        values[i] = saved - h;
        const nn::Tensor down = forward();
        values[i] = saved;
        long double diff = 0.0L;
        for (std::size_t k = 0; k < up.size(); ++k)
            diff += static_cast<long double>(up[k] - down[k]) * (static_cast<long double>(up[k]) + down[k]);
        worst = std::max(worst, rel_err(analytic[i], static_cast<double>(diff / (4.0L * h))));
    }
    return worst;
}

inline nn::Tensor random_tensor(nn::Shape shape, Rng& rng, double scale = 1.0) {
    nn::Tensor t(std::move(shape));
    for (auto& v : t.values()) v = scale * rng.normal();
    return t;
}

inline double dot(const nn::Tensor& a, const nn::Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double half_sq(const nn::Tensor& t) { return 0.5 * dot(t, t); }

}  // namespace oamfso::test
