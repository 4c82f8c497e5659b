#include "mg/simulator.hpp"

#include <cmath>
#include <sstream>

namespace mg {

namespace {

struct Deriv {
    Vec th, v, pf, qf;
};

Deriv rates(const NetworkModel& net, const std::vector<DerUnit>& ders, const Vec& th,
            const Vec& v, const Vec& pf, const Vec& qf, const Vec& u, const Residual* res) {
    const auto n = th.size();
    NetworkState s{th, v, 0.0};
    const Injections pq = compute_injections(net, s);
    Deriv d{Vec(n), Vec(n), Vec(n), Vec(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const DerUnit& der = ders[i];
        const bool ctl = der.mode != DerMode::NonControllable;
        const double up = (ctl && u.size()) ? u(i) : 0.0;
        const double uq = (ctl && u.size()) ? u(n + i) : 0.0;
        DroopRates r = droop_derivatives(der, pf(i), qf(i), up, uq);
        if (res) {
            r.dtheta += res->f_omega(i);
            r.dv += res->f_v(i);
        }
        d.th(i) = r.dtheta;
        d.v(i) = r.dv;
        d.pf(i) = (pq.p(i) - pf(i)) / der.tf;
        d.qf(i) = (pq.q(i) - qf(i)) / der.tf;
    }
    if (net.grid_connected && n > 0) {
        d.th(0) = 0.0;
        d.v(0) = 0.0;
    }
    return d;
}

}  // namespace

NetworkState simulate_step(const NetworkModel& net, std::vector<DerUnit>& ders,
                           const NetworkState& state, const Vec& u, double dt,
                           const Residual* residual) {
    const auto n = state.theta.size();
    Vec th = state.theta, v = state.v, pf(n), qf(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        pf(i) = ders[i].p_filt;
        qf(i) = ders[i].q_filt;
    }
    if (net.grid_connected && n > 0) {
        th(0) = 0.0;
        v(0) = 1.0;
    }

    const Deriv k1 = rates(net, ders, th, v, pf, qf, u, residual);
    const double h = 0.5 * dt;
    const Deriv k2 = rates(net, ders, th + h * k1.th, v + h * k1.v, pf + h * k1.pf,
                           qf + h * k1.qf, u, residual);
    const Deriv k3 = rates(net, ders, th + h * k2.th, v + h * k2.v, pf + h * k2.pf,
                           qf + h * k2.qf, u, residual);
    const Deriv k4 = rates(net, ders, th + dt * k3.th, v + dt * k3.v, pf + dt * k3.pf,
                           qf + dt * k3.qf, u, residual);
    const double w = dt / 6.0;

    NetworkState out;
    out.theta = th + w * (k1.th + 2.0 * k2.th + 2.0 * k3.th + k4.th);
    out.v = v + w * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
    out.t = state.t + dt;
    const Vec pf1 = pf + w * (k1.pf + 2.0 * k2.pf + 2.0 * k3.pf + k4.pf);
    const Vec qf1 = qf + w * (k1.qf + 2.0 * k2.qf + 2.0 * k3.qf + k4.qf);

    if (!out.theta.allFinite() || !out.v.allFinite() || !pf1.allFinite() || !qf1.allFinite() ||
        (n > 0 && out.v.minCoeff() <= 0.0)) {
        std::ostringstream os;
        os << "simulation diverged at t=" << out.t << " s";
        throw DivergenceError(os.str(), out.t);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        ders[i].p_filt = pf1(i);
        ders[i].q_filt = qf1(i);
    }
    return out;
}

Vec angle_rates(const NetworkModel& net, const std::vector<DerUnit>& ders,
                const NetworkState& state, const Residual* residual) {
    const auto n = state.theta.size();
    Vec pf(n), qf(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        pf(i) = ders[i].p_filt;
        qf(i) = ders[i].q_filt;
    }
    return rates(net, ders, state.theta, state.v, pf, qf, Vec(), residual).th;
}

NetworkState steady_state(const NetworkModel& net, std::vector<DerUnit>& ders) {
    const int n = net.n_der;
    NetworkState s{Vec::Zero(n), Vec::Ones(n), 0.0};
    if (net.grid_connected && n > 1) {
        const int m = n - 1;
        auto mismatch = [&](const NetworkState& st) {
            const Injections pq = compute_injections(net, st);
            Vec f(2 * m);
            for (int i = 0; i < m; ++i) {
                f(i) = pq.p(i + 1) - ders[i + 1].p_ref;
                f(m + i) = pq.q(i + 1) - ders[i + 1].q_ref;
            }
            return f;
        };
        for (int it = 0; it < 50; ++it) {
            const Vec f = mismatch(s);
            if (f.lpNorm<Eigen::Infinity>() < 1e-13) break;
            Mat J(2 * m, 2 * m);
            const double h = 1e-7;
            for (int j = 0; j < 2 * m; ++j) {
                NetworkState a = s, b = s;
                if (j < m) {
                    a.theta(j + 1) += h;
                    b.theta(j + 1) -= h;
                } else {
                    a.v(j - m + 1) += h;
                    b.v(j - m + 1) -= h;
                }
                J.col(j) = (mismatch(a) - mismatch(b)) / (2.0 * h);
            }
            const Vec dx = J.fullPivLu().solve(-f);
            s.theta.tail(m) += dx.head(m);
            s.v.tail(m) += dx.tail(m);
            if (!s.v.allFinite() || s.v.minCoeff() <= 0.0)
                throw NetworkError("initial power flow did not converge");
        }
        if (mismatch(s).lpNorm<Eigen::Infinity>() > 1e-9)
            throw NetworkError("initial power flow did not converge");
    }
    const Injections pq = compute_injections(net, s);
    for (int i = 0; i < n; ++i) {
        if (!net.grid_connected) {
            ders[i].p_ref = pq.p(i);
            ders[i].q_ref = pq.q(i);
        }
        ders[i].p_filt = pq.p(i);
        ders[i].q_filt = pq.q(i);
    }
    return s;
}

}  // namespace mg
