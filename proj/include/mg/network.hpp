#pragma once

#include "mg/core.hpp"

#include <vector>

namespace mg {

// All quantities per-unit.
struct Line {
    int from = 0;
    int to = 0;
    double r = 0.0;
    double x = 0.0;
};

struct Load {
    int bus = 0;
    double p = 0.0;
    double q = 0.0;
    double v_nom = 1.0;
};

struct NetworkModel {
    int n_der = 0;
    Mat G;
    Mat B;
    bool grid_connected = false;
};

struct NetworkState {
    Vec theta;
    Vec v;
    double t = 0.0;
};

// Folds loads as constant-impedance shunts and Kron-reduces every bus not in der_buses.
// Row/column i of the result corresponds to der_buses[i].
NetworkModel build_network(const std::vector<Line>& lines, const std::vector<Load>& loads,
                           const std::vector<int>& der_buses);

struct Injections {
    Vec p;
    Vec q;
};

Injections compute_injections(const NetworkModel& net, const NetworkState& state);

}  // namespace mg
