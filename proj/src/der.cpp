#include "mg/der.hpp"

#include "mg/core.hpp"

#include <cmath>
#include <string>

namespace mg {

DerMode parse_der_mode(std::string_view s) {
    if (s == "grid_forming") return DerMode::GridForming;
    if (s == "grid_following") return DerMode::GridFollowing;
    if (s == "non_controllable") return DerMode::NonControllable;
    throw ConfigError("unknown DER mode '" + std::string(s) + "'");
}

std::string_view to_string(DerMode m) {
    switch (m) {
        case DerMode::GridForming: return "grid_forming";
        case DerMode::GridFollowing: return "grid_following";
        case DerMode::NonControllable: return "non_controllable";
    }
    return "?";
}

void validate(const DerUnit& d) {
    if (!(d.sigma_omega > 0.0)) throw ConfigError("sigma_omega must be > 0");
    if (!(d.sigma_v > 0.0)) throw ConfigError("sigma_v must be > 0");
    if (!(d.tau_v > 0.0)) throw ConfigError("tau_v must be > 0");
    if (!(d.tf > 0.0)) throw ConfigError("tf must be > 0");
}

double filter_step(double x, double u, double tf, double dt) {
    return u + (x - u) * std::exp(-dt / tf);
}

DroopRates droop_derivatives(const DerUnit& der, double p, double q, double du_p, double du_q) {
    const double kv = der.sigma_v / der.tau_v;
    return {-der.sigma_omega * (p - der.p_ref) + der.sigma_omega * du_p,
            -kv * (q - der.q_ref) + kv * du_q};
}

void apply_setpoint_update(DerUnit& der, double dp, double dq) {
    if (der.mode == DerMode::NonControllable)
        throw ConfigError("setpoint update rejected: unit is not controllable");
    der.p_ref += dp;
    der.q_ref += dq;
}

}  // namespace mg
