#pragma once

#include "mg/der.hpp"
#include "mg/network.hpp"
#include "mg/residual.hpp"

#include <vector>

namespace mg {

// One explicit RK4 step of the droop ODEs jointly with the power filters.
// u = [dP*; dQ*] offsets (entries of NonControllable units are ignored).
// While grid_connected, bus 0 is held at theta=0, v=1.
NetworkState simulate_step(const NetworkModel& net, std::vector<DerUnit>& ders,
                           const NetworkState& state, const Vec& u, double dt,
                           const Residual* residual = nullptr);

// Instantaneous droop rates at the current state (used for frequency readout).
Vec angle_rates(const NetworkModel& net, const std::vector<DerUnit>& ders,
                const NetworkState& state, const Residual* residual = nullptr);

// Grid-connected: Newton power flow with bus 0 as slack and the rest at their setpoints.
// Islanded: flat start, setpoints overwritten with the flat-start injections.
// Filter states are set to the resulting injections.
NetworkState steady_state(const NetworkModel& net, std::vector<DerUnit>& ders);

}  // namespace mg
