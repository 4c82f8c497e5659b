#pragma once

#include "mg/core.hpp"

#include <cstdint>
#include <random>

namespace mg {

struct UncertaintyConfig {
    bool enabled = false;
    double amp_omega = 0.0;  // rad/s
    double amp_v = 0.0;      // pu/s
    double lag = 0.03;       // s
    std::uint64_t seed = 0;
};

struct ResidualState {
    ResidualState(const UncertaintyConfig& cfg, int n);
    std::mt19937_64 rng;
    Vec f_omega;
    Vec f_v;
};

struct Residual {
    Vec f_omega;
    Vec f_v;
};

// Lagged Gaussian with stationary standard deviation equal to the configured amplitude.
Residual residual_step(const UncertaintyConfig& cfg, ResidualState& state, double dt);

}  // namespace mg
