#include "mg/network.hpp"

#include "mg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <queue>
#include <string>

namespace mg {

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;

NetworkModel build_network(const std::vector<Line>& lines, const std::vector<Load>& loads,
                           const std::vector<int>& der_buses) {
    if (der_buses.empty()) throw NetworkError("network needs at least one DER bus");

    int nb = 0;
    auto see = [&](int b, const char* what) {
        if (b < 0) throw NetworkError(std::string("negative bus index in ") + what);
        nb = std::max(nb, b + 1);
    };
    for (const auto& l : lines) {
        see(l.from, "line");
        see(l.to, "line");
    }
    for (const auto& ld : loads) see(ld.bus, "load");
    for (int b : der_buses) see(b, "der_buses");

    std::vector<char> is_der(nb, 0);
    for (int b : der_buses) {
        if (is_der[b]) throw NetworkError("duplicate DER bus " + std::to_string(b));
        is_der[b] = 1;
    }

    CMat Y = CMat::Zero(nb, nb);
    std::vector<std::vector<int>> adj(nb);
    for (const auto& l : lines) {
        if (!(l.r >= 0.0) || !std::isfinite(l.r) || !std::isfinite(l.x))
            throw NetworkError("line " + std::to_string(l.from) + "-" + std::to_string(l.to) +
                               ": R must be >= 0 and X finite");
        if (l.r == 0.0 && l.x == 0.0)
            throw NetworkError("line " + std::to_string(l.from) + "-" + std::to_string(l.to) +
                               " has zero impedance");
        if (l.from == l.to) throw NetworkError("line connects bus to itself");
        const cd y = 1.0 / cd(l.r, l.x);
        Y(l.from, l.from) += y;
        Y(l.to, l.to) += y;
        Y(l.from, l.to) -= y;
        Y(l.to, l.from) -= y;
        adj[l.from].push_back(l.to);
        adj[l.to].push_back(l.from);
    }
    for (const auto& ld : loads) {
        if (!(ld.v_nom > 0.0)) throw NetworkError("load nominal voltage must be positive");
        Y(ld.bus, ld.bus) += cd(ld.p, -ld.q) / (ld.v_nom * ld.v_nom);
    }

    std::vector<char> seen(nb, 0);
    std::queue<int> bfs;
    bfs.push(der_buses.front());
    seen[der_buses.front()] = 1;
    while (!bfs.empty()) {
        int b = bfs.front();
        bfs.pop();
        for (int c : adj[b])
            if (!seen[c]) {
                seen[c] = 1;
                bfs.push(c);
            }
    }
    for (int b = 0; b < nb; ++b)
        if (!seen[b]) throw NetworkError("disconnected network: bus " + std::to_string(b));

    std::vector<int> elim;
    for (int b = 0; b < nb; ++b)
        if (!is_der[b]) elim.push_back(b);

    const int n = static_cast<int>(der_buses.size());
    const int m = static_cast<int>(elim.size());
    CMat Yrr(n, n), Yre(n, m), Yer(m, n), Yee(m, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) Yrr(i, j) = Y(der_buses[i], der_buses[j]);
        for (int j = 0; j < m; ++j) Yre(i, j) = Y(der_buses[i], elim[j]);
    }
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) Yer(i, j) = Y(elim[i], der_buses[j]);
        for (int j = 0; j < m; ++j) Yee(i, j) = Y(elim[i], elim[j]);
    }

    CMat Yred = Yrr;
    if (m > 0) {
        Eigen::FullPivLU<CMat> lu(Yee);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) throw NetworkError("singular Kron reduction block");
        Yred -= Yre * lu.solve(Yer);
    }

    NetworkModel net;
    net.n_der = n;
    net.G = Yred.real();
    net.B = Yred.imag();
    net.G = 0.5 * (net.G + net.G.transpose()).eval();
    net.B = 0.5 * (net.B + net.B.transpose()).eval();
    return net;
}

Injections compute_injections(const NetworkModel& net, const NetworkState& state) {
    Injections out;
    kernels::injections(net.G, net.B, state.theta, state.v, out.p, out.q);
    return out;
}

}  // namespace mg
