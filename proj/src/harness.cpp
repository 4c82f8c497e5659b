#include "mg/harness.hpp"

#include "mg/simulator.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <random>

namespace mg {

PiOutput pi_step(const PiGains& g, const Vec& v_err, const Vec& f_err, double dt, PiState& st) {
    const auto n = v_err.size();
    if (st.int_v.size() != n) st.int_v = Vec::Zero(n);
    if (st.int_f.size() != n) st.int_f = Vec::Zero(n);
    const double L = g.limit;
    PiOutput out{Vec(n), Vec(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        st.int_v(i) = std::clamp(st.int_v(i) + g.ki_v * v_err(i) * dt, -L, L);
        st.int_f(i) = std::clamp(st.int_f(i) + g.ki_f * f_err(i) * dt, -L, L);
        out.dq(i) = std::clamp(g.kp_v * v_err(i) + st.int_v(i), -L, L);
        out.dp(i) = std::clamp(g.kp_f * f_err(i) + st.int_f(i), -L, L);
    }
    return out;
}

void DelayQueue::push(double t_sent, double delay, Vec u) {
    q_.emplace(t_sent + std::max(0.0, delay), std::make_pair(t_sent, std::move(u)));
}

std::vector<std::pair<Delivery, Vec>> DelayQueue::pop_due(double t) {
    std::vector<std::pair<Delivery, Vec>> out;
    while (!q_.empty() && q_.begin()->first <= t) {
        auto node = q_.extract(q_.begin());
        out.emplace_back(Delivery{node.mapped().first, node.key(), t}, std::move(node.mapped().second));
    }
    return out;
}

double settling_time(const std::vector<double>& t, const Mat& dev, double band, double t_from) {
    const auto T = static_cast<Eigen::Index>(t.size());
    Eigen::Index first = 0;
    while (first < T && t[first] < t_from) ++first;
    if (first == T) return kNotSettled;
    Eigen::Index last_out = -1;
    for (Eigen::Index k = first; k < T; ++k)
        if (!(dev.col(k).cwiseAbs().maxCoeff() <= band)) last_out = k;
    if (last_out < 0) return t[first];
    if (last_out == T - 1) return kNotSettled;
    double ts = t[last_out];
    for (Eigen::Index i = 0; i < dev.rows(); ++i) {
        const double a = std::abs(dev(i, last_out)), b = std::abs(dev(i, last_out + 1));
        if (a > band && a > b) {
            const double frac = (a - band) / (a - b);
            ts = std::max(ts, t[last_out] + frac * (t[last_out + 1] - t[last_out]));
        }
    }
    return ts;
}

RunMetrics compute_metrics(const std::vector<double>& t, const Mat& v, const Mat& f, double v_nom,
                           double f_nom, double band_v, double band_f, double t_from) {
    RunMetrics m;
    if (t.empty()) return m;
    const Mat dv = v.array() - v_nom;
    const Mat df = f.array() - f_nom;
    m.settling_time_v = settling_time(t, dv, band_v, t_from);
    m.settling_time_f = settling_time(t, df, band_f, t_from);

    const auto T = static_cast<Eigen::Index>(t.size());
    Eigen::Index first = 0;
    while (first < T && t[first] < t_from) ++first;
    if (first == T) return m;
    for (Eigen::Index k = first; k < T; ++k) {
        m.max_dev_v = std::max(m.max_dev_v, dv.col(k).cwiseAbs().maxCoeff());
        m.max_dev_f = std::max(m.max_dev_f, df.col(k).cwiseAbs().maxCoeff());
    }
    const double t_tail = t.back() - 0.1 * (t.back() - t[first]);
    double sv = 0.0, sf = 0.0;
    long cnt = 0;
    for (Eigen::Index k = first; k < T; ++k) {
        if (t[k] < t_tail) continue;
        sv += dv.col(k).cwiseAbs().mean();
        sf += df.col(k).cwiseAbs().mean();
        ++cnt;
    }
    if (cnt) {
        m.sse_v = sv / cnt;
        m.sse_f = sf / cnt;
    }
    return m;
}

namespace {

std::mt19937_64 substream(std::uint64_t seed, std::uint32_t tag) {
    std::seed_seq ss{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), tag};
    return std::mt19937_64(ss);
}

enum Stream : std::uint32_t { kNoise = 1, kDelay = 2, kAmbient = 3, kDither = 4 };

struct Sample {
    Vec theta, v, omega, u;
};

struct Pending {
    bool ok = false;
    Vec v_pred;
};

Pending predict_v(const IdentifiedModel& m, const Vec& z, const Vec& u, const Vec& v_anchor) {
    const auto n = v_anchor.size();
    const Prediction p = predict_one_step(m, z, u);
    return {p.y.allFinite(), p.y.tail(n) + v_anchor};
}

double median(std::vector<double> x) {
    if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
    const auto mid = x.begin() + static_cast<long>(x.size() / 2);
    std::nth_element(x.begin(), mid, x.end());
    if (x.size() % 2) return *mid;
    const double hi = *mid;
    return 0.5 * (hi + *std::max_element(x.begin(), mid));
}

void put(std::string& s, double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    s += buf;
}

}  // namespace

RunResult run_scenario(const ScenarioSpec& sp, const RunOptions& opt) {
    RunResult res;
    const int n = static_cast<int>(sp.system.ders.size());
    const double f_nom = sp.system.f_nom;
    const double w_nom = 2.0 * M_PI * f_nom;

    std::vector<DerUnit> ders = sp.system.ders;
    std::vector<Load> loads = sp.system.loads;
    NetworkModel net = build_network(sp.system.lines, loads, sp.system.der_buses);
    net.grid_connected = sp.system.grid_connected;
    NetworkState st = steady_state(net, ders);

    std::mt19937_64 noise_rng = substream(sp.seed, kNoise);
    std::mt19937_64 delay_rng = substream(sp.seed, kDelay);
    std::mt19937_64 dither_rng = substream(sp.seed, kDither);
    UncertaintyConfig unc = sp.uncertainty;
    unc.seed = substream(sp.seed, kAmbient)();
    ResidualState rstate(unc, n);
    Residual cur{Vec::Zero(n), Vec::Zero(n)};
    std::normal_distribution<double> gauss(0.0, 1.0);

    const double t_end = opt.t_end.value_or(sp.t_end);
    const long steps = std::lround(t_end / sp.dt);
    const long ratio = std::lround(sp.ts / sp.dt);
    const long metric_every = std::max(1L, std::lround(1e-3 / sp.dt));
    const double t_enable = sp.enable_time();
    const double t_island = sp.islanding_time().value_or(0.0);
    const double t_half = 0.5 * (t_enable + t_end);
    const int N = sp.okid.N;
    const long t_opt_steps = std::lround(sp.okid.t_opt / sp.ts);

    const Vec lb = Vec::Constant(2 * n, -sp.u_bound), ub = Vec::Constant(2 * n, sp.u_bound);
    const CostMatrices cost = build_cost(sp.lqr, n);
    LqrController lqr(cost, lb, ub, sp.dare, sp.warm_start);
    const bool model_based = sp.controller == ControllerKind::Proposed ||
                             sp.controller == ControllerKind::ConventionalOkid ||
                             sp.controller == ControllerKind::Edmdc;

    OkidState enh, conv;
    PiState pis;
    Vec pi_applied = Vec::Zero(2 * n);
    DelayQueue queue;
    std::deque<Sample> hist;
    Vec u_last = Vec::Zero(2 * n);
    Pending pend_enh, pend_conv, pend_act;
    std::vector<double> err_enh, err_conv, id_ms, gamma_ms;
    std::size_t next_event = 0;
    res.gamma_min = res.gamma_max = sp.okid.gamma0;

    std::vector<double> mt;
    std::vector<Vec> mv, mf;
    std::string csv = "t_s,bus,v_pu,f_hz,theta_rad,p_pu,q_pu,u_p_pu,u_q_pu,gamma_opt,pred_err\n";

    auto controllable = [&](int i) { return ders[i].mode != DerMode::NonControllable; };

    auto secondary = [&](double t) {
        const Vec rates = angle_rates(net, ders, st, &cur);
        const Injections pq = compute_injections(net, st);
        Sample s{st.theta, st.v, rates.array() + w_nom, u_last};
        if (sp.measurement.noise_sigma > 0.0)
            for (int i = 0; i < n; ++i) {
                s.theta(i) += sp.measurement.noise_sigma * gauss(noise_rng);
                s.v(i) += sp.measurement.noise_sigma * gauss(noise_rng);
                s.omega(i) += sp.measurement.noise_sigma * gauss(noise_rng);
            }
        hist.push_back(s);
        while (static_cast<int>(hist.size()) > N) hist.pop_front();

        double err_act = std::numeric_limits<double>::quiet_NaN();
        if (pend_enh.ok) {
            const double e = prediction_error(s.v, pend_enh.v_pred);
            if (t >= t_island) err_enh.push_back(e);
        }
        if (pend_conv.ok) {
            const double e = prediction_error(s.v, pend_conv.v_pred);
            if (t >= t_island) err_conv.push_back(e);
        }
        if (pend_act.ok) err_act = prediction_error(s.v, pend_act.v_pred);
        pend_enh = pend_conv = pend_act = Pending{};

        Vec u = Vec::Zero(2 * n);
        const bool enabled = t >= t_enable - 1e-9 && sp.controller != ControllerKind::None;

        if (enabled && sp.controller == ControllerKind::Pi) {
            const Vec v_err = 1.0 - s.v.array();
            const Vec f_err = f_nom - s.omega.array() / (2.0 * M_PI);
            const PiOutput po = pi_step(sp.pi, v_err, f_err, sp.ts, pis);
            Vec target(2 * n);
            target << po.dp, po.dq;
            for (int i = 0; i < 2 * n; ++i) {
                u(i) = std::clamp(target(i) - pi_applied(i), lb(i), ub(i));
                pi_applied(i) += u(i);
            }
        }

        std::optional<IdentifiedModel> acting;
        Vec z;
        Vec v_anchor;
        if (enabled && static_cast<int>(hist.size()) == N) {
            Mat th(n, N), vv(n, N), ww(n, N), uu(2 * n, N);
            for (int j = 0; j < N; ++j) {
                th.col(j) = hist[j].theta;
                vv.col(j) = hist[j].v;
                ww.col(j) = hist[j].omega;
                uu.col(j) = hist[j].u;
            }
            const MeasurementWindow w = make_window(th, vv, ww, uu);
            if (!w.u.isZero(0.0)) {
                const LiftedData d = lift_window(w, 1.0, w_nom);
                z = lift_observables(s.theta, s.v, s.omega, w.theta_l, 1.0, w_nom);
                v_anchor = w.v_l;
                try {
                    OkidStepInfo info;
                    const auto t0 = std::chrono::steady_clock::now();
                    IdentifiedModel me = okid_step(d.Y, w.u, d.Z, sp.okid, enh, true, t_opt_steps,
                                                   &info);
                    const double ms = std::chrono::duration<double, std::milli>(
                                          std::chrono::steady_clock::now() - t0)
                                          .count();
                    (info.gamma_updated ? gamma_ms : id_ms).push_back(ms);
                    for (auto& wmsg : info.warnings) res.warnings.push_back(wmsg);
                    IdentifiedModel mc = okid_step(d.Y, w.u, d.Z, sp.okid, conv, false, 0);
                    res.gamma_min = std::min(res.gamma_min, enh.gamma);
                    res.gamma_max = std::max(res.gamma_max, enh.gamma);
                    if (opt.record_gamma_history) res.gamma_history.push_back(enh.gamma);
                    if (sp.controller == ControllerKind::Proposed) acting = me;
                    if (sp.controller == ControllerKind::ConventionalOkid) acting = mc;
                    if (sp.controller == ControllerKind::Edmdc)
                        acting = edmdc_fit(d.Z, w.u, d.Y, sp.okid.ridge);
                    res.model = model_based ? acting : std::optional<IdentifiedModel>(me);
                    if (model_based) {
                        if (!lqr.update(acting->A, acting->B)) {
                            ++res.gain_holds;
                            res.warnings.push_back("t=" + std::to_string(t) +
                                                   ": gain held (" + lqr.last_error() + ")");
                        }
                        u = lqr.control(z);
                        if (lqr.has_gain()) {
                            const double rho = spectral_radius(acting->A - acting->B * lqr.state().K);
                            res.max_closed_loop_radius = std::max(res.max_closed_loop_radius, rho);
                            if (!(rho < 1.0)) ++res.unstable_gain_steps;
                        }
                    }
                    for (int i = 0; i < n; ++i)
                        if (!controllable(i)) u(i) = u(n + i) = 0.0;
                    pend_enh = predict_v(me, z, u, v_anchor);
                    pend_conv = predict_v(mc, z, u, v_anchor);
                    if (sp.controller == ControllerKind::Proposed) pend_act = pend_enh;
                    if (sp.controller == ControllerKind::ConventionalOkid) pend_act = pend_conv;
                    if (sp.controller == ControllerKind::Edmdc)
                        pend_act = predict_v(*acting, z, u, v_anchor);
                } catch (const IdentificationError& e) {
                    res.warnings.push_back("t=" + std::to_string(t) + ": " + e.what());
                    if (model_based) u = lqr.control(z);
                }
            } else if (model_based) {
                std::uniform_int_distribution<int> coin(0, 1);
                for (int i = 0; i < 2 * n; ++i)
                    u(i) = (coin(dither_rng) ? 1.0 : -1.0) * sp.dither_fraction * sp.u_bound;
                ++res.dither_steps;
            }
            if (z.size()) {
                const double nz = z.norm();
                (t < t_half ? res.lifted_norm_first : res.lifted_norm_second) =
                    std::max(t < t_half ? res.lifted_norm_first : res.lifted_norm_second, nz);
            }
        }
        for (int i = 0; i < n; ++i)
            if (!controllable(i)) u(i) = u(n + i) = 0.0;

        if (enabled) {
            const double delay = std::max(
                0.0, sp.measurement.delay_mean + sp.measurement.delay_sigma * gauss(delay_rng));
            queue.push(t, delay, u);
        }
        u_last = u;

        const double gamma_col = sp.controller == ControllerKind::Proposed ? enh.gamma
                                 : sp.controller == ControllerKind::ConventionalOkid
                                     ? 0.5
                                     : std::numeric_limits<double>::quiet_NaN();
        for (int i = 0; i < n; ++i) {
            put(csv, t);
            csv += ',';
            csv += std::to_string(sp.system.der_buses[i]);
            for (double x : {st.v(i), f_nom + rates(i) / (2.0 * M_PI), st.theta(i), pq.p(i),
                             pq.q(i), u(i), u(n + i), gamma_col, err_act}) {
                csv += ',';
                put(csv, x);
            }
            csv += '\n';
        }
    };

    auto apply_event = [&](const Event& e) {
        switch (e.kind) {
            case EventKind::Islanding:
                net.grid_connected = false;
                break;
            case EventKind::LoadStep: {
                auto it = std::find_if(loads.begin(), loads.end(),
                                       [&](const Load& l) { return l.bus == e.bus; });
                if (it == loads.end()) {
                    loads.push_back({e.bus, e.dp, e.dq, 1.0});
                } else {
                    it->p += e.dp;
                    it->q += e.dq;
                }
                const bool gc = net.grid_connected;
                net = build_network(sp.system.lines, loads, sp.system.der_buses);
                net.grid_connected = gc;
                break;
            }
            case EventKind::IrradianceDrop:
                for (int i = 0; i < n; ++i)
                    if (sp.system.der_buses[i] == e.bus) ders[i].p_ref -= e.dp;
                break;
        }
    };

    const double stop = opt.stop_at.value_or(t_end);
    try {
        for (long i = 0;; ++i) {
            const double t = i * sp.dt;
            st.t = t;
            while (next_event < sp.events.size() && sp.events[next_event].t <= t + 1e-12)
                apply_event(sp.events[next_event++]);
            for (auto& [d, u] : queue.pop_due(t + 1e-12)) {
                for (int k = 0; k < n; ++k)
                    if (controllable(k)) apply_setpoint_update(ders[k], u(k), u(n + k));
                d.t_applied = t;
                res.deliveries.push_back(d);
            }
            if (i % ratio == 0) secondary(t);
            if (i % metric_every == 0) {
                mt.push_back(t);
                mv.push_back(st.v);
                mf.push_back((angle_rates(net, ders, st, &cur).array() / (2.0 * M_PI) + f_nom)
                                 .matrix());
            }
            res.t_final = t;
            if (i >= steps || t >= stop - 1e-12) break;
            cur = residual_step(unc, rstate, sp.dt);
            st = simulate_step(net, ders, st, Vec(), sp.dt, &cur);
        }
    } catch (const DivergenceError& e) {
        res.diverged = true;
        res.error = e.what();
        res.t_final = e.time;
    }

    Mat V(n, static_cast<Eigen::Index>(mt.size())), F(n, static_cast<Eigen::Index>(mt.size()));
    for (std::size_t k = 0; k < mt.size(); ++k) {
        V.col(static_cast<Eigen::Index>(k)) = mv[k];
        F.col(static_cast<Eigen::Index>(k)) = mf[k];
    }
    res.metrics = compute_metrics(mt, V, F, 1.0, f_nom, sp.band_v, sp.band_f, t_island);
    if (res.diverged) {
        res.metrics.settling_time_v = res.metrics.settling_time_f = kNotSettled;
    }
    auto mean = [](const std::vector<double>& x) {
        if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (double e : x) s += e;
        return s / static_cast<double>(x.size());
    };
    res.metrics.mean_pred_err_proposed = mean(err_enh);
    res.metrics.mean_pred_err_conventional = mean(err_conv);
    res.metrics.id_steps = static_cast<int>(id_ms.size());
    res.metrics.gamma_steps = static_cast<int>(gamma_ms.size());
    res.metrics.id_step_median_ms = median(id_ms);
    if (!id_ms.empty()) res.metrics.id_step_max_ms = *std::max_element(id_ms.begin(), id_ms.end());
    if (!gamma_ms.empty())
        res.metrics.gamma_step_max_ms = *std::max_element(gamma_ms.begin(), gamma_ms.end());
    res.bibo_bounded = !res.diverged && std::isfinite(res.lifted_norm_second) &&
                       res.lifted_norm_second <= 1.5 * res.lifted_norm_first + 1e-12;
    if (model_based && lqr.has_gain()) {
        res.controller = lqr.state();
        res.cost = cost;
    }

    if (!opt.out_dir.empty()) {
        std::filesystem::create_directories(opt.out_dir);
        res.csv_path = (std::filesystem::path(opt.out_dir) / "trajectory.csv").string();
        res.summary_path = (std::filesystem::path(opt.out_dir) / "summary.json").string();
        std::ofstream(res.csv_path, std::ios::binary) << csv;
        std::ofstream(res.summary_path, std::ios::binary) << summary_json(sp, res) << '\n';
    }
    return res;
}

std::string summary_json(const ScenarioSpec& sp, const RunResult& r) {
    using nlohmann::json;
    auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
    const RunMetrics& m = r.metrics;
    json j;
    j["scenario"] = sp.name;
    j["controller"] = to_string(sp.controller);
    j["seed"] = sp.seed;
    j["status"] = r.diverged ? "diverged" : "ok";
    if (r.diverged) j["error"] = r.error;
    j["t_final_s"] = r.t_final;
    j["settling_time_v_s"] = num(m.settling_time_v);
    j["settling_time_f_s"] = num(m.settling_time_f);
    j["sse_v_pu"] = num(m.sse_v);
    j["sse_f_hz"] = num(m.sse_f);
    j["max_dev_v_pu"] = num(m.max_dev_v);
    j["max_dev_f_hz"] = num(m.max_dev_f);
    j["mean_pred_err_proposed"] = num(m.mean_pred_err_proposed);
    j["mean_pred_err_conventional"] = num(m.mean_pred_err_conventional);
    j["id_step_median_ms"] = num(m.id_step_median_ms);
    j["id_step_max_ms"] = num(m.id_step_max_ms);
    j["gamma_step_max_ms"] = num(m.gamma_step_max_ms);
    j["id_steps"] = m.id_steps;
    j["gamma_steps"] = m.gamma_steps;
    j["gamma_min"] = r.gamma_min;
    j["gamma_max"] = r.gamma_max;
    j["dither_steps"] = r.dither_steps;
    j["gain_holds"] = r.gain_holds;
    j["warnings"] = r.warnings.size();
    j["bibo"] = {{"max_closed_loop_spectral_radius", num(r.max_closed_loop_radius)},
                 {"unstable_gain_steps", r.unstable_gain_steps},
                 {"lifted_norm_first_half", num(r.lifted_norm_first)},
                 {"lifted_norm_second_half", num(r.lifted_norm_second)},
                 {"bounded", r.bibo_bounded}};
    if (r.controller && r.cost && r.model) {
        json arr = json::array();
        for (const DiscMargin& d : compute_disc_margins(r.cost->Q, r.cost->R, r.controller->K,
                                                        r.model->B, r.controller->S)) {
            arr.push_back({{"channel", d.channel},
                           {"defined", d.defined},
                           {"center", num(d.center)},
                           {"radius", num(d.radius)},
                           {"gain_lo", num(d.gain_lo)},
                           {"gain_hi", num(d.gain_hi)},
                           {"phase_lo_rad", num(d.phase_lo)},
                           {"phase_hi_rad", num(d.phase_hi)}});
        }
        j["disc_margins"] = arr;
    }
    return j.dump(2);
}

}  // namespace mg
