#pragma once

#include "mg/core.hpp"

#include <cstdint>
#include <vector>

namespace mg {

double spectral_radius(const Mat& M);

struct DiscMargin {
    int channel = 0;
    bool defined = false;
    double rho = 0.0;
    double mu = 0.0;
    double center = 0.0;
    double radius = 0.0;
    double gain_lo = 0.0;
    double gain_hi = 0.0;
    double phase_lo = 0.0;
    double phase_hi = 0.0;
};

std::vector<DiscMargin> compute_disc_margins(const Mat& Q, const Mat& R, const Mat& K, const Mat& B,
                                             const Mat& S);

struct BiboOptions {
    int steps = 10000;
    double input_bound = 1.0;
    double u_bound = 1.0;
    double growth = 1.5;
    std::uint64_t seed = 1;
    Vec z0;
};

struct BiboReport {
    double spectral_radius = 0.0;
    bool flagged = false;     // closed-loop spectral radius >= 1
    double max_norm = 0.0;    // running max of |z| under bounded input
    double bound = 0.0;       // envelope from the first half of the run
    bool bounded = false;
};

// Closed loop z+ = A z + B (sat(-K z) + d), d uniform in [-input_bound, input_bound].
BiboReport bibo_check(const Mat& A, const Mat& B, const Mat& K, const BiboOptions& opt = {});

}  // namespace mg
