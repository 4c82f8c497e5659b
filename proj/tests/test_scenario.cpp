#include "mg/scenario.hpp"
#include "test_util.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>

using namespace mg;
using nlohmann::json;

namespace {

json tiny() {
    return json::parse(R"({
      "name": "tiny",
      "base": {"s_base_va": 10000, "v_base_v": 400, "f_nom_hz": 50},
      "timing": {"primary_step_s": 1e-4, "secondary_step_s": 0.02, "t_end_s": 0.5,
                 "secondary_enable_lag_s": 0.1},
      "network": {"grid_connected": false,
                  "lines": [{"from": 0, "to": 1, "r_pu": 0.02, "x_pu": 0.05}],
                  "loads": [{"bus": 1, "p_w": 5000, "q_var": 1000}]},
      "ders": [{"bus": 0, "mode": "grid_forming", "sigma_omega_rad_per_Ws": 1e-3,
                "sigma_v_V_per_var": 2e-3, "tau_v_s": 0.05, "tf_s": 0.02857,
                "p_ref_w": 2500, "q_ref_var": 500},
               {"bus": 1, "mode": "grid_following", "sigma_omega_rad_per_Ws": 1e-3,
                "sigma_v_V_per_var": 2e-3, "tau_v_s": 0.05, "tf_s": 0.02857,
                "p_ref_w": 2500, "q_ref_var": 500}],
      "events": [],
      "controller": "none",
      "seed": 3
    })");
}

}  // namespace

TEST_CASE("bundled 4-bus scenario carries the table parameters in per-unit") {
    const ScenarioSpec s = load_scenario(mgtest::source_path("scenarios/mg4.json"));
    const double sb = 30000.0, vb = 480.0, zb = vb * vb / sb;
    CHECK(s.system.ders.size() == 4);
    CHECK(s.system.ders[0].sigma_omega == doctest::Approx(2.14e-3 * sb));
    CHECK(s.system.ders[3].sigma_omega == doctest::Approx(2.83e-3 * sb));
    CHECK(s.system.ders[1].sigma_v == doctest::Approx(6.3e-3 * sb / vb));
    CHECK(s.system.ders[0].tf == doctest::Approx(0.02857));
    CHECK(s.system.ders[0].p_ref == doctest::Approx(9000.0 / sb));
    CHECK(s.system.lines[0].r == doctest::Approx(0.08 / zb));
    CHECK(s.system.lines[0].x == doctest::Approx(2.0 * M_PI * 60.0 * 0.35e-3 / zb));
    CHECK(s.system.lines[7].x == doctest::Approx(2.0 * M_PI * 60.0 * 2.40e-3 / zb));
    CHECK(s.okid.N == 9);
    CHECK(s.okid.eta == doctest::Approx(1.0 / 9.0));
    CHECK(s.ts == doctest::Approx(0.03));
    CHECK(s.dt == doctest::Approx(1e-4));
    CHECK(s.lqr.q_v == 1e3);
    CHECK(s.lqr.q_omega == 1e-6);
    CHECK(s.u_bound == doctest::Approx(1000.0 / sb));
    CHECK(s.measurement.noise_sigma == doctest::Approx(0.0056));
    CHECK(s.measurement.delay_mean == doctest::Approx(0.05));
    CHECK(s.measurement.delay_sigma == doctest::Approx(0.002));
    REQUIRE(s.islanding_time().has_value());
    CHECK(*s.islanding_time() == doctest::Approx(0.7));
    CHECK(s.enable_time() == doctest::Approx(0.8));
    CHECK(s.controller == ControllerKind::Proposed);
}

TEST_CASE("bundled 13-bus scenario carries its overrides") {
    const ScenarioSpec s = load_scenario(mgtest::source_path("scenarios/mg13.json"));
    const double sb = 150000.0;
    CHECK(s.okid.N == 14);
    CHECK(s.okid.eta == doctest::Approx(1.0 / 14.0));
    CHECK(s.system.ders.size() == 6);
    CHECK(s.system.ders[3].sigma_omega == doctest::Approx(3.14e-4 * sb));
    CHECK(s.lqr.q_omega == 0.01);
    int nc = 0;
    for (const auto& d : s.system.ders) nc += d.mode == DerMode::NonControllable;
    CHECK(nc == 2);
    CHECK(s.events.size() == 4);
    CHECK(*s.islanding_time() == doctest::Approx(0.4));
    CHECK(s.enable_time() == doctest::Approx(0.5));
}

TEST_CASE("inline scenario parses with an empty event list") {
    const ScenarioSpec s = parse_scenario(tiny().dump());
    CHECK(s.events.empty());
    CHECK_FALSE(s.islanding_time().has_value());
    CHECK(s.system.f_nom == 50.0);
    CHECK(s.system.lines[0].x == doctest::Approx(0.05));
    CHECK(s.system.loads[0].p == doctest::Approx(0.5));
    CHECK(s.controller == ControllerKind::None);
    CHECK(s.seed == 3);
}

TEST_CASE("unknown keys are rejected with their path") {
    json j = tiny();
    j["ders"][1]["gain"] = 1.0;
    try {
        parse_scenario(j.dump());
        FAIL("expected rejection");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("ders[1].gain") != std::string::npos);
    }
    j = tiny();
    j["extra"] = true;
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);
}

TEST_CASE("validation failures") {
    json j = tiny();
    j["events"] = json::parse(R"([{"type": "islanding", "t_s": 0.3}, {"type": "islanding", "t_s": 0.1}])");
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);

    j = tiny();
    j["events"] = json::parse(R"([{"type": "islanding", "t_s": 0.6}])");
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);

    j = tiny();
    j["ders"][0]["sigma_v_V_per_var"] = -1.0;
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);

    j = tiny();
    j["network"]["lines"][0]["r_pu"] = -0.1;
    CHECK_THROWS(parse_scenario(j.dump()));

    j = tiny();
    j["measurement"] = json::parse(R"({"pmu_noise_sigma_pu": -1})");
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);

    j = tiny();
    j["controller"] = "mpc";
    CHECK_THROWS_AS(parse_scenario(j.dump()), ConfigError);

    CHECK_THROWS_AS(parse_scenario("{not json"), ConfigError);
    CHECK_THROWS_AS(load_scenario("/nonexistent/file.json"), ConfigError);
}

TEST_CASE("controller names round trip") {
    for (const char* n : {"proposed", "okid", "edmdc", "pi", "none"})
        CHECK(to_string(parse_controller(n)) == n);
}
