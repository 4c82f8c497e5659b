#pragma once

#include "mg/der.hpp"
#include "mg/lqr.hpp"
#include "mg/network.hpp"
#include "mg/okid.hpp"
#include "mg/residual.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mg {

enum class ControllerKind { Proposed, ConventionalOkid, Edmdc, Pi, None };

ControllerKind parse_controller(const std::string& s);
std::string to_string(ControllerKind c);

enum class EventKind { Islanding, LoadStep, IrradianceDrop };

// Powers per-unit; bus is a network bus index.
struct Event {
    EventKind kind = EventKind::Islanding;
    double t = 0.0;
    int bus = -1;
    double dp = 0.0;
    double dq = 0.0;
};

struct MeasurementModel {
    double noise_sigma = 0.0;
    double delay_mean = 0.0;
    double delay_sigma = 0.0;
    double ambient_sigma = 0.0;
};

// kp_v: pu var per pu volt, kp_f: pu W per Hz; ki_* the same per second.
struct PiGains {
    double kp_v = 0.0;
    double ki_v = 0.0;
    double kp_f = 0.0;
    double ki_f = 0.0;
    double limit = 1.0;  // positional output / integrator clamp, pu
};

struct SystemSpec {
    double s_base = 1.0;
    double v_base = 1.0;
    double f_nom = 60.0;
    bool grid_connected = true;
    std::vector<Line> lines;
    std::vector<Load> loads;
    std::vector<int> der_buses;
    std::vector<DerUnit> ders;
};

struct ScenarioSpec {
    std::string name;
    SystemSpec system;
    std::vector<Event> events;
    double dt = 1e-4;
    double ts = 0.03;
    double t_end = 3.0;
    double secondary_enable_lag = 0.1;
    std::optional<double> secondary_enable_at;
    ControllerKind controller = ControllerKind::Proposed;
    std::uint64_t seed = 1;
    MeasurementModel measurement;
    UncertaintyConfig uncertainty;
    OkidConfig okid;
    double dither_fraction = 0.1;
    LqrWeights lqr;
    DareOptions dare;
    bool warm_start = true;
    double u_bound = 1.0;  // pu per secondary step
    PiGains pi;
    double band_v = 0.01;
    double band_f = 0.05;

    double enable_time() const;
    std::optional<double> islanding_time() const;
};

ScenarioSpec load_scenario(const std::string& path);
ScenarioSpec parse_scenario(const std::string& json_text);

}  // namespace mg
