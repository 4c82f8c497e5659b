#include "mg/harness.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>

namespace {

int cmd_run(const std::string& scenario, const std::string& controller, const std::string& out,
            std::uint64_t seed, double t_end, bool have_t_end) {
    mg::ScenarioSpec sp = mg::load_scenario(scenario);
    sp.controller = mg::parse_controller(controller);
    sp.seed = seed;
    mg::RunOptions opt;
    opt.out_dir = out;
    if (have_t_end) {
        if (!(t_end > 0.0)) throw mg::ConfigError("--t-end must be positive");
        opt.t_end = t_end;
    }
    const mg::RunResult r = mg::run_scenario(sp, opt);
    const auto& m = r.metrics;
    std::printf("status       %s\n", r.diverged ? "diverged" : "ok");
    if (r.diverged) std::printf("error        %s\n", r.error.c_str());
    std::printf("settling v   %.4f s\n", m.settling_time_v);
    std::printf("settling f   %.4f s\n", m.settling_time_f);
    std::printf("sse v        %.6f pu\n", m.sse_v);
    std::printf("sse f        %.6f Hz\n", m.sse_f);
    std::printf("max dev v    %.6f pu\n", m.max_dev_v);
    std::printf("max dev f    %.6f Hz\n", m.max_dev_f);
    std::printf("pred err     proposed %.6g conventional %.6g\n", m.mean_pred_err_proposed,
                m.mean_pred_err_conventional);
    std::printf("id step      median %.3f ms (gamma steps max %.3f ms)\n", m.id_step_median_ms,
                m.gamma_step_max_ms);
    std::printf("outputs      %s %s\n", r.csv_path.c_str(), r.summary_path.c_str());
    return r.diverged ? 2 : 0;
}

int cmd_margins(const std::string& scenario) {
    mg::ScenarioSpec sp = mg::load_scenario(scenario);
    sp.controller = mg::ControllerKind::Proposed;
    const double t_snap = 0.5 * (sp.enable_time() + sp.t_end);
    mg::RunOptions opt;
    opt.stop_at = t_snap;
    const mg::RunResult r = mg::run_scenario(sp, opt);
    if (r.diverged) {
        std::fprintf(stderr, "mg: %s\n", r.error.c_str());
        return 2;
    }
    if (!r.controller || !r.model) {
        std::fprintf(stderr, "mg: no LQR gain available at t=%.3f s\n", t_snap);
        return 2;
    }
    const auto ms = mg::compute_disc_margins(r.cost->Q, r.cost->R, r.controller->K, r.model->B,
                                             r.controller->S);
    std::printf("snapshot t=%.3f s, gamma=%.4f, rank=%d\n", r.t_final, r.model->gamma_opt,
                r.model->rank_r);
    std::printf("rho=%.6g mu=%.6g closed-loop spectral radius=%.6f\n", ms.front().rho,
                ms.front().mu,
                mg::spectral_radius(r.model->A - r.model->B * r.controller->K));
    std::printf("%-8s %-8s %-12s %-12s %-12s %-12s %-12s\n", "channel", "defined", "center",
                "radius", "gain_lo", "gain_hi", "phase_hi");
    for (const auto& d : ms)
        std::printf("%-8d %-8s %-12.6g %-12.6g %-12.6g %-12.6g %-12.6g\n", d.channel,
                    d.defined ? "yes" : "no", d.center, d.radius, d.gain_lo, d.gain_hi,
                    d.phase_hi);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Microgrid secondary control with online Koopman identification"};
    app.require_subcommand(1);

    std::string scenario, controller = "proposed", out = "out";
    std::uint64_t seed = 1;
    double t_end = 0.0;
    auto* run = app.add_subcommand("run", "simulate a scenario");
    run->add_option("--scenario", scenario, "scenario JSON file")->required();
    run->add_option("--controller", controller, "proposed|okid|edmdc|pi|none")
        ->check(CLI::IsMember({"proposed", "okid", "edmdc", "pi", "none"}));
    run->add_option("--out", out, "output directory");
    run->add_option("--seed", seed, "RNG seed");
    auto* t_opt = run->add_option("--t-end", t_end, "end time override (s)");

    std::string m_scenario;
    auto* margins = app.add_subcommand("margins", "disc gain/phase margins at mid-run");
    margins->add_option("--scenario", m_scenario, "scenario JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*run) return cmd_run(scenario, controller, out, seed, t_end, t_opt->count() > 0);
        return cmd_margins(m_scenario);
    } catch (const mg::ConfigError& e) {
        std::fprintf(stderr, "mg: config error: %s\n", e.what());
        return 1;
    } catch (const mg::NetworkError& e) {
        std::fprintf(stderr, "mg: config error: %s\n", e.what());
        return 1;
    } catch (const mg::DivergenceError& e) {
        std::fprintf(stderr, "mg: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mg: %s\n", e.what());
        return 2;
    }
}
