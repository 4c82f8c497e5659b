#pragma once

#include <string_view>

namespace mg {

enum class DerMode { GridForming, GridFollowing, NonControllable };

DerMode parse_der_mode(std::string_view s);
std::string_view to_string(DerMode m);

// Gains are per-unit: sigma_omega in rad/s per pu power, sigma_v in pu voltage per pu var.
struct DerUnit {
    DerMode mode = DerMode::GridForming;
    double sigma_omega = 0.0;
    double sigma_v = 0.0;
    double tau_v = 0.05;
    double tf = 0.02857;
    double p_ref = 0.0;
    double q_ref = 0.0;
    double p_filt = 0.0;
    double q_filt = 0.0;
};

void validate(const DerUnit& der);

double filter_step(double x, double u, double tf, double dt);

struct DroopRates {
    double dtheta = 0.0;
    double dv = 0.0;
};

// p, q are the filtered powers; du_p, du_q the setpoint offsets.
DroopRates droop_derivatives(const DerUnit& der, double p, double q, double du_p, double du_q);

void apply_setpoint_update(DerUnit& der, double dp, double dq);

}  // namespace mg
