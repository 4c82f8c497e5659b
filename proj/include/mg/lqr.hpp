#pragma once

#include "mg/core.hpp"

#include <optional>

namespace mg {

struct LqrWeights {
    double q_v = 1e3;
    double q_sin = 0.0;
    double q_cos = 0.0;
    double q_omega = 1e-6;
    double r_p = 1e-6;
    double r_q = 1e-6;
};

struct CostMatrices {
    Mat Q;
    Mat R;
};

CostMatrices build_cost(const LqrWeights& w, int n);

struct DareOptions {
    double tol = 1e-9;
    int max_iter = 10000;
};

// Backward fixed-point iteration from S0 (Q when not given).
Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const DareOptions& opt = {},
               const Mat* S0 = nullptr, int* iterations = nullptr);

double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& S);

Mat compute_gain(const Mat& A, const Mat& B, const Mat& S, const Mat& R);

Vec control_step(const Mat& K, const Vec& z, const Vec& u_lb, const Vec& u_ub);

struct ControllerState {
    Mat K;
    Mat S;
    Vec u_lb;
    Vec u_ub;
};

// Re-solves the Riccati equation for each new model; keeps the previous gain
// when a solve fails.
class LqrController {
public:
    LqrController(CostMatrices cost, Vec u_lb, Vec u_ub, DareOptions opt, bool warm_start);

    // Returns false when the solve failed and the previous gain was kept.
    bool update(const Mat& A, const Mat& B);
    Vec control(const Vec& z) const;

    const ControllerState& state() const { return st_; }
    const CostMatrices& cost() const { return cost_; }
    bool has_gain() const { return st_.K.size() > 0; }
    const std::string& last_error() const { return last_error_; }

private:
    CostMatrices cost_;
    DareOptions opt_;
    bool warm_;
    ControllerState st_;
    std::string last_error_;
};

}  // namespace mg
