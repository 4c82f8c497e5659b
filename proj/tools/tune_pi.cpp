// Coarse grid search for PI secondary gains on a scenario.
#include "mg/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <limits>

int main(int argc, char** argv) {
    CLI::App app{"coarse PI gain search"};
    std::string scenario;
    std::uint64_t seed = 1;
    app.add_option("--scenario", scenario)->required();
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);

    mg::ScenarioSpec sp;
    try {
        sp = mg::load_scenario(scenario);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 1;
    }
    sp.controller = mg::ControllerKind::Pi;
    sp.seed = seed;

    const double kv[] = {0.0, 0.5, 1.0, 2.0, 4.0};
    const double ki_v[] = {0.5, 1.0, 2.0, 4.0, 8.0};
    const double kf[] = {0.0, 0.01, 0.03, 0.1};
    const double ki_f[] = {0.01, 0.03, 0.1, 0.3};

    double best_cost = std::numeric_limits<double>::infinity();
    mg::PiGains best = sp.pi;
    for (double a : kv)
        for (double b : ki_v)
            for (double c : kf)
                for (double d : ki_f) {
                    sp.pi.kp_v = a;
                    sp.pi.ki_v = b;
                    sp.pi.kp_f = c;
                    sp.pi.ki_f = d;
                    const mg::RunResult r = mg::run_scenario(sp);
                    if (r.diverged) continue;
                    const auto& m = r.metrics;
                    // settled runs rank by the slower channel, the rest by final error
                    const double cost =
                        std::isfinite(m.settling_time_v) && std::isfinite(m.settling_time_f)
                            ? std::max(m.settling_time_v, m.settling_time_f)
                            : 100.0 + m.sse_v / sp.band_v + m.sse_f / sp.band_f;
                    std::printf("kp_v=%-5g ki_v=%-5g kp_f=%-5g ki_f=%-5g  ts_v=%-8.4g ts_f=%-8.4g "
                                "sse_v=%-9.3g sse_f=%-9.3g\n",
                                a, b, c, d, m.settling_time_v, m.settling_time_f, m.sse_v, m.sse_f);
                    if (cost < best_cost) {
                        best_cost = cost;
                        best = sp.pi;
                    }
                }
    std::printf("best: \"kp_v_pu_per_pu\": %g, \"ki_v_pu_per_pu_s\": %g, \"kp_f_pu_per_hz\": %g, "
                "\"ki_f_pu_per_hz_s\": %g (cost %g)\n",
                best.kp_v, best.ki_v, best.kp_f, best.ki_f, best_cost);
    return 0;
}
