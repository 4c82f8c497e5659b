#include "mg/residual.hpp"

#include <cmath>

namespace mg {

ResidualState::ResidualState(const UncertaintyConfig& cfg, int n)
    : rng(cfg.seed), f_omega(Vec::Zero(n)), f_v(Vec::Zero(n)) {}

Residual residual_step(const UncertaintyConfig& cfg, ResidualState& st, double dt) {
    const auto n = st.f_omega.size();
    if (!cfg.enabled || (cfg.amp_omega == 0.0 && cfg.amp_v == 0.0))
        return {Vec::Zero(n), Vec::Zero(n)};
    const double a = cfg.lag > 0.0 ? std::exp(-dt / cfg.lag) : 0.0;
    const double g = std::sqrt(1.0 - a * a);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
        st.f_omega(i) = a * st.f_omega(i) + cfg.amp_omega * g * nd(st.rng);
        st.f_v(i) = a * st.f_v(i) + cfg.amp_v * g * nd(st.rng);
    }
    return {st.f_omega, st.f_v};
}

}  // namespace mg
