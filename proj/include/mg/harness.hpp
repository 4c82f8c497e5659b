#pragma once

#include "mg/scenario.hpp"
#include "mg/stability.hpp"

#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mg {

struct PiState {
    Vec int_v;
    Vec int_f;
};

struct PiOutput {
    Vec dp;
    Vec dq;
};

// Positional PI per unit: dq from voltage error (pu), dp from frequency error (Hz).
// Integrators and outputs are clamped to [-limit, limit].
PiOutput pi_step(const PiGains& g, const Vec& v_err, const Vec& f_err, double dt, PiState& st);

struct Delivery {
    double t_sent = 0.0;
    double t_due = 0.0;
    double t_applied = 0.0;
};

// Time-stamped control messages released once the clock reaches their due time.
class DelayQueue {
public:
    void push(double t_sent, double delay, Vec u);
    // Removes every message with t_due <= t, earliest first.
    std::vector<std::pair<Delivery, Vec>> pop_due(double t);
    bool empty() const { return q_.empty(); }
    std::size_t size() const { return q_.size(); }

private:
    std::multimap<double, std::pair<double, Vec>> q_;
};

inline constexpr double kNotSettled = std::numeric_limits<double>::infinity();

struct RunMetrics {
    double settling_time_v = kNotSettled;
    double settling_time_f = kNotSettled;
    double sse_v = 0.0;
    double sse_f = 0.0;
    double max_dev_v = 0.0;
    double max_dev_f = 0.0;
    double mean_pred_err_proposed = std::numeric_limits<double>::quiet_NaN();
    double mean_pred_err_conventional = std::numeric_limits<double>::quiet_NaN();
    double id_step_median_ms = std::numeric_limits<double>::quiet_NaN();
    double id_step_max_ms = std::numeric_limits<double>::quiet_NaN();
    double gamma_step_max_ms = std::numeric_limits<double>::quiet_NaN();
    int id_steps = 0;
    int gamma_steps = 0;
};

// Samples t (ascending), v and f are n x T. Settling is reported as absolute time, with the
// last exit interpolated linearly; metrics only use samples with t >= t_from.
RunMetrics compute_metrics(const std::vector<double>& t, const Mat& v, const Mat& f,
                           double v_nom, double f_nom, double band_v, double band_f,
                           double t_from = 0.0);

// Settling of a single band check; exposed for tests.
double settling_time(const std::vector<double>& t, const Mat& dev, double band, double t_from);

struct RunOptions {
    std::string out_dir;                 // empty: write nothing
    std::optional<double> stop_at;       // end the run early (snapshot)
    std::optional<double> t_end;         // override the scenario t_end
    bool record_gamma_history = false;
};

struct RunResult {
    RunMetrics metrics;
    bool diverged = false;
    std::string error;
    double t_final = 0.0;
    std::vector<std::string> warnings;
    int gain_holds = 0;
    int dither_steps = 0;
    double max_closed_loop_radius = 0.0;
    int unstable_gain_steps = 0;
    double lifted_norm_first = 0.0;
    double lifted_norm_second = 0.0;
    bool bibo_bounded = false;
    double gamma_min = 0.5;
    double gamma_max = 0.5;
    std::vector<double> gamma_history;
    std::vector<Delivery> deliveries;
    std::optional<IdentifiedModel> model;  // latest model acting in the loop
    std::optional<ControllerState> controller;
    std::optional<CostMatrices> cost;
    std::string csv_path;
    std::string summary_path;
};

RunResult run_scenario(const ScenarioSpec& spec, const RunOptions& opt = {});

std::string summary_json(const ScenarioSpec& spec, const RunResult& r);

}  // namespace mg
