#include "oamfso/nn/adam.hpp"

#include <cmath>

namespace oamfso::nn {

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config) {
    require(params.size() == grads.size() && state.m.size() == params.size() &&
                state.v.size() == params.size(),
            Errc::shape_mismatch, "adam_step operand sizes differ");
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double b1 = config.beta1, b2 = config.beta2;
    const double step = config.lr / (1.0 - std::pow(b1, t));
    const double v_correction = 1.0 / (1.0 - std::pow(b2, t));
    const double eps = config.eps;
    double* p = params.data();
    const double* g = grads.data();
    double* m = state.m.data();
    double* v = state.v.data();
    const std::size_t n = params.size();
#pragma omp simd
    for (std::size_t i = 0; i < n; ++i) {
        const double gi = g[i];
        m[i] = b1 * m[i] + (1.0 - b1) * gi;
        v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
        p[i] -= step * m[i] / (std::sqrt(v[i] * v_correction) + eps);
    }
}

Adam::Adam(AdamConfig config, std::span<const ParamBlock> blocks) : config_(config) {
    states_.reserve(blocks.size());
    for (const auto& b : blocks) states_.emplace_back(b.values.size());
}

void Adam::step(std::span<const ParamBlock> params, std::span<const ParamBlock> grads) {
    require(params.size() == states_.size() && grads.size() == states_.size(), Errc::shape_mismatch,
            "optimiser block count changed");
    for (std::size_t k = 0; k < states_.size(); ++k) {
        adam_step(params[k].values, grads[k].values, states_[k], config_);
    }
}

}  // namespace oamfso::nn
