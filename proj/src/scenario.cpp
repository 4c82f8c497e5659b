#include "mg/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mg {

using nlohmann::json;

ControllerKind parse_controller(const std::string& s) {
    if (s == "proposed") return ControllerKind::Proposed;
    if (s == "okid") return ControllerKind::ConventionalOkid;
    if (s == "edmdc") return ControllerKind::Edmdc;
    if (s == "pi") return ControllerKind::Pi;
    if (s == "none") return ControllerKind::None;
    throw ConfigError("unknown controller '" + s + "'");
}

std::string to_string(ControllerKind c) {
    switch (c) {
        case ControllerKind::Proposed: return "proposed";
        case ControllerKind::ConventionalOkid: return "okid";
        case ControllerKind::Edmdc: return "edmdc";
        case ControllerKind::Pi: return "pi";
        case ControllerKind::None: return "none";
    }
    return "?";
}

double ScenarioSpec::enable_time() const {
    if (secondary_enable_at) return *secondary_enable_at;
    if (auto ti = islanding_time()) return *ti + secondary_enable_lag;
    return secondary_enable_lag;
}

std::optional<double> ScenarioSpec::islanding_time() const {
    for (const auto& e : events)
        if (e.kind == EventKind::Islanding) return e.t;
    return std::nullopt;
}

namespace {

// Object reader that remembers which keys were consumed so leftovers can be rejected.
class Obj {
public:
    Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) fail("", "expected an object");
    }

    bool has(const std::string& k) const { return j_.contains(k); }

    template <class T>
    T req(const std::string& k) {
        if (!j_.contains(k)) fail(k, "missing required key");
        return get<T>(k);
    }

    template <class T>
    T opt(const std::string& k, T def) {
        if (!j_.contains(k)) return def;
        return get<T>(k);
    }

    Obj sub(const std::string& k) {
        if (!j_.contains(k)) fail(k, "missing required section");
        seen_.insert(k);
        return Obj(j_.at(k), at(k));
    }

    const json& raw(const std::string& k) {
        seen_.insert(k);
        return j_.at(k);
    }

    std::string at(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

    [[noreturn]] void fail(const std::string& k, const std::string& msg) const {
        throw ConfigError((k.empty() ? (path_.empty() ? "<root>" : path_) : at(k)) + ": " + msg);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) fail(it.key(), "unknown key");
    }

private:
    template <class T>
    T get(const std::string& k) {
        seen_.insert(k);
        try {
            return j_.at(k).get<T>();
        } catch (const json::exception&) {
            fail(k, "wrong type");
        }
    }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

void positive(Obj& o, const std::string& k, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) o.fail(k, "must be positive");
}

void nonneg(Obj& o, const std::string& k, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) o.fail(k, "must be >= 0");
}

Line parse_line(Obj o, double z_base, double f_nom) {
    Line l;
    l.from = o.req<int>("from");
    l.to = o.req<int>("to");
    const bool ohm = o.has("r_ohm");
    const bool pu = o.has("r_pu");
    if (ohm == pu) o.fail("", "give exactly one of r_ohm or r_pu");
    if (ohm) {
        l.r = o.req<double>("r_ohm") / z_base;
        const bool lmh = o.has("l_mh"), xo = o.has("x_ohm");
        if (lmh == xo) o.fail("", "give exactly one of l_mh or x_ohm");
        const double x = lmh ? 2.0 * M_PI * f_nom * o.req<double>("l_mh") * 1e-3
                             : o.req<double>("x_ohm");
        l.x = x / z_base;
    } else {
        l.r = o.req<double>("r_pu");
        l.x = o.req<double>("x_pu");
    }
    nonneg(o, "r", l.r);
    o.finish();
    return l;
}

Event parse_event(Obj o, double s_base) {
    Event e;
    const std::string type = o.req<std::string>("type");
    e.t = o.req<double>("t_s");
    nonneg(o, "t_s", e.t);
    if (type == "islanding") {
        e.kind = EventKind::Islanding;
    } else if (type == "load_step") {
        e.kind = EventKind::LoadStep;
        e.bus = o.req<int>("bus");
        e.dp = o.req<double>("dp_w") / s_base;
        e.dq = o.opt<double>("dq_var", 0.0) / s_base;
    } else if (type == "irradiance_drop") {
        e.kind = EventKind::IrradianceDrop;
        e.bus = o.req<int>("bus");
        e.dp = o.req<double>("dp_w") / s_base;
    } else {
        o.fail("type", "unknown event type '" + type + "'");
    }
    o.finish();
    return e;
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("JSON parse error: ") + e.what());
    }
    Obj r(root, "");
    ScenarioSpec sc;
    sc.name = r.opt<std::string>("name", "scenario");
    if (r.has("description")) r.raw("description");

    {
        Obj b = r.sub("base");
        sc.system.s_base = b.req<double>("s_base_va");
        sc.system.v_base = b.req<double>("v_base_v");
        sc.system.f_nom = b.opt<double>("f_nom_hz", 60.0);
        positive(b, "s_base_va", sc.system.s_base);
        positive(b, "v_base_v", sc.system.v_base);
        positive(b, "f_nom_hz", sc.system.f_nom);
        b.finish();
    }
    const double sb = sc.system.s_base, vb = sc.system.v_base;
    const double z_base = vb * vb / sb;

    {
        Obj t = r.sub("timing");
        sc.dt = t.opt<double>("primary_step_s", 1e-4);
        sc.ts = t.opt<double>("secondary_step_s", 0.03);
        sc.t_end = t.req<double>("t_end_s");
        sc.secondary_enable_lag = t.opt<double>("secondary_enable_lag_s", 0.1);
        if (t.has("secondary_enable_s")) sc.secondary_enable_at = t.req<double>("secondary_enable_s");
        positive(t, "primary_step_s", sc.dt);
        if (sc.dt > 1e-3) t.fail("primary_step_s", "must be <= 1 ms");
        positive(t, "secondary_step_s", sc.ts);
        positive(t, "t_end_s", sc.t_end);
        nonneg(t, "secondary_enable_lag_s", sc.secondary_enable_lag);
        const double ratio = sc.ts / sc.dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-6)
            t.fail("secondary_step_s", "must be an integer multiple of primary_step_s");
        t.finish();
    }

    {
        Obj n = r.sub("network");
        sc.system.grid_connected = n.opt<bool>("grid_connected", true);
        const json& lines = n.raw("lines");
        if (!lines.is_array()) n.fail("lines", "expected an array");
        for (std::size_t i = 0; i < lines.size(); ++i)
            sc.system.lines.push_back(parse_line(
                Obj(lines[i], n.at("lines[" + std::to_string(i) + "]")), z_base, sc.system.f_nom));
        if (n.has("loads")) {
            const json& loads = n.raw("loads");
            if (!loads.is_array()) n.fail("loads", "expected an array");
            for (std::size_t i = 0; i < loads.size(); ++i) {
                Obj o(loads[i], n.at("loads[" + std::to_string(i) + "]"));
                Load ld;
                ld.bus = o.req<int>("bus");
                ld.p = o.req<double>("p_w") / sb;
                ld.q = o.opt<double>("q_var", 0.0) / sb;
                ld.v_nom = o.opt<double>("v_nom_pu", 1.0);
                positive(o, "v_nom_pu", ld.v_nom);
                o.finish();
                sc.system.loads.push_back(ld);
            }
        }
        n.finish();
    }

    {
        const json& ders = r.raw("ders");
        if (!ders.is_array() || ders.empty()) r.fail("ders", "expected a non-empty array");
        for (std::size_t i = 0; i < ders.size(); ++i) {
            Obj o(ders[i], "ders[" + std::to_string(i) + "]");
            DerUnit d;
            sc.system.der_buses.push_back(o.req<int>("bus"));
            d.mode = parse_der_mode(o.req<std::string>("mode"));
            const double so = o.req<double>("sigma_omega_rad_per_Ws");
            const double sv = o.req<double>("sigma_v_V_per_var");
            positive(o, "sigma_omega_rad_per_Ws", so);
            positive(o, "sigma_v_V_per_var", sv);
            d.sigma_omega = so * sb;
            d.sigma_v = sv * sb / vb;
            d.tau_v = o.opt<double>("tau_v_s", 0.05);
            d.tf = o.opt<double>("tf_s", 0.02857);
            positive(o, "tau_v_s", d.tau_v);
            positive(o, "tf_s", d.tf);
            d.p_ref = o.opt<double>("p_ref_w", 0.0) / sb;
            d.q_ref = o.opt<double>("q_ref_var", 0.0) / sb;
            if (o.has("inner_loops")) o.raw("inner_loops");
            o.finish();
            sc.system.ders.push_back(d);
        }
    }

    if (r.has("inner_loops")) r.raw("inner_loops");

    if (r.has("measurement")) {
        Obj m = r.sub("measurement");
        auto& mm = sc.measurement;
        mm.noise_sigma = m.opt<double>("pmu_noise_sigma_pu", 0.0);
        mm.delay_mean = m.opt<double>("delay_mean_s", 0.0);
        mm.delay_sigma = m.opt<double>("delay_sigma_s", 0.0);
        mm.ambient_sigma = m.opt<double>("ambient_sigma_pu", 0.0);
        nonneg(m, "pmu_noise_sigma_pu", mm.noise_sigma);
        nonneg(m, "delay_mean_s", mm.delay_mean);
        nonneg(m, "delay_sigma_s", mm.delay_sigma);
        nonneg(m, "ambient_sigma_pu", mm.ambient_sigma);
        m.finish();
    }
    sc.uncertainty.enabled = sc.measurement.ambient_sigma > 0.0;
    sc.uncertainty.amp_omega = sc.measurement.ambient_sigma;
    sc.uncertainty.amp_v = sc.measurement.ambient_sigma;
    sc.uncertainty.lag = sc.ts;
    if (r.has("uncertainty")) {
        Obj u = r.sub("uncertainty");
        auto& uc = sc.uncertainty;
        uc.enabled = u.opt<bool>("enabled", true);
        uc.amp_omega = u.opt<double>("amp_omega_rad_per_s", 0.0);
        uc.amp_v = u.opt<double>("amp_v_pu_per_s", 0.0);
        uc.lag = u.opt<double>("lag_s", sc.ts);
        nonneg(u, "amp_omega_rad_per_s", uc.amp_omega);
        nonneg(u, "amp_v_pu_per_s", uc.amp_v);
        nonneg(u, "lag_s", uc.lag);
        u.finish();
    }

    if (r.has("identification")) {
        Obj o = r.sub("identification");
        auto& c = sc.okid;
        c.N = o.opt<int>("window_n", 9);
        c.eta = o.has("eta") ? o.req<double>("eta") : 1.0 / c.N;
        c.t_opt = o.opt<double>("t_opt_s", 0.6);
        c.gamma0 = o.opt<double>("gamma0", 0.5);
        c.rank_r = o.opt<int>("rank_r", 0);
        c.ridge = o.opt<double>("ridge", 1e-8);
        c.layout = parse_hankel_layout(o.opt<std::string>("hankel_layout", "triangular"));
        sc.dither_fraction = o.opt<double>("dither_fraction", 0.1);
        nonneg(o, "dither_fraction", sc.dither_fraction);
        o.finish();
    }
    try {
        validate(sc.okid, sc.ts);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("identification: ") + e.what());
    }

    if (r.has("lqr")) {
        Obj o = r.sub("lqr");
        auto& w = sc.lqr;
        w.q_v = o.opt<double>("q_v", w.q_v);
        w.q_sin = o.opt<double>("q_sin", w.q_sin);
        w.q_cos = o.opt<double>("q_cos", w.q_cos);
        w.q_omega = o.opt<double>("q_omega", w.q_omega);
        w.r_p = o.opt<double>("r_p", w.r_p);
        w.r_q = o.opt<double>("r_q", w.r_q);
        sc.u_bound = o.opt<double>("u_bound_va", 1000.0) / sb;
        sc.dare.tol = o.opt<double>("dare_tol", 1e-9);
        sc.dare.max_iter = o.opt<int>("dare_max_iter", 10000);
        sc.warm_start = o.opt<bool>("warm_start", true);
        positive(o, "u_bound_va", sc.u_bound);
        positive(o, "dare_tol", sc.dare.tol);
        if (sc.dare.max_iter < 1) o.fail("dare_max_iter", "must be >= 1");
        o.finish();
    } else {
        sc.u_bound = 1000.0 / sb;
    }
    try {
        build_cost(sc.lqr, 1);
    } catch (const ConfigError& e) {
        throw ConfigError(std::string("lqr: ") + e.what());
    }

    if (r.has("pi")) {
        Obj o = r.sub("pi");
        auto& g = sc.pi;
        g.kp_v = o.opt<double>("kp_v_pu_per_pu", 0.0);
        g.ki_v = o.opt<double>("ki_v_pu_per_pu_s", 0.0);
        g.kp_f = o.opt<double>("kp_f_pu_per_hz", 0.0);
        g.ki_f = o.opt<double>("ki_f_pu_per_hz_s", 0.0);
        g.limit = o.opt<double>("limit_pu", 1.0);
        nonneg(o, "kp_v_pu_per_pu", g.kp_v);
        nonneg(o, "ki_v_pu_per_pu_s", g.ki_v);
        nonneg(o, "kp_f_pu_per_hz", g.kp_f);
        nonneg(o, "ki_f_pu_per_hz_s", g.ki_f);
        positive(o, "limit_pu", g.limit);
        o.finish();
    }

    if (r.has("metrics")) {
        Obj o = r.sub("metrics");
        sc.band_v = o.opt<double>("band_v_pu", 0.01);
        sc.band_f = o.opt<double>("band_f_hz", 0.05);
        positive(o, "band_v_pu", sc.band_v);
        positive(o, "band_f_hz", sc.band_f);
        o.finish();
    }

    if (r.has("events")) {
        const json& ev = r.raw("events");
        if (!ev.is_array()) r.fail("events", "expected an array");
        for (std::size_t i = 0; i < ev.size(); ++i)
            sc.events.push_back(parse_event(Obj(ev[i], "events[" + std::to_string(i) + "]"), sb));
    }
    for (std::size_t i = 1; i < sc.events.size(); ++i)
        if (sc.events[i].t < sc.events[i - 1].t) r.fail("events", "events must be time-sorted");
    if (!sc.events.empty() && !(sc.t_end > sc.events.back().t))
        r.fail("timing", "t_end_s must exceed the last event time");

    sc.controller = parse_controller(r.opt<std::string>("controller", "proposed"));
    sc.seed = r.opt<std::uint64_t>("seed", 1);
    sc.uncertainty.seed = sc.seed;
    r.finish();

    for (const auto& e : sc.events) {
        if (e.kind == EventKind::IrradianceDrop &&
            std::find(sc.system.der_buses.begin(), sc.system.der_buses.end(), e.bus) ==
                sc.system.der_buses.end())
            throw ConfigError("events: irradiance_drop bus " + std::to_string(e.bus) +
                              " has no DER");
    }
    try {
        NetworkModel net =
            build_network(sc.system.lines, sc.system.loads, sc.system.der_buses);
        (void)net;
    } catch (const NetworkError& e) {
        throw ConfigError(std::string("network: ") + e.what());
    }
    return sc;
}

ScenarioSpec load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

}  // namespace mg
