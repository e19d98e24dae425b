#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "oamfso/nn/tensor.hpp"

namespace oamfso::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Moments for one parameter block.
struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    explicit AdamState(std::size_t size = 0) : m(size, 0.0), v(size, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& config);

/// Named, shaped view of a parameter array; models expose their weights as a
/// fixed-order list of these for the optimiser and for persistence.
struct ParamBlock {
    std::string name;
    Shape shape;
    std::span<double> values;
};

/// Adam over a fixed list of blocks.
class Adam {
public:
    Adam(AdamConfig config, std::span<const ParamBlock> blocks);

    void step(std::span<const ParamBlock> params, std::span<const ParamBlock> grads);
    [[nodiscard]] const AdamConfig& config() const noexcept { return config_; }
    [[nodiscard]] std::uint64_t steps() const noexcept { return states_.empty() ? 0 : states_.front().t; }

private:
    AdamConfig config_;
    std::vector<AdamState> states_;
};

}  // namespace oamfso::nn
