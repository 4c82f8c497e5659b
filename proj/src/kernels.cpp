#include "mg/kernels.hpp"

#include <cmath>

namespace mg::kernels {

namespace {

inline void row_sums(const Mat& G, const Mat& B, const Vec& theta, const Vec& v, Eigen::Index i,
                     double& pi, double& qi) {
    const Eigen::Index n = v.size();
    double p = 0.0, q = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double d = theta(i) - theta(j);
        const double c = std::cos(d), s = std::sin(d);
        const double vv = v(i) * v(j);
        p += vv * (G(i, j) * c + B(i, j) * s);
        q += vv * (G(i, j) * s - B(i, j) * c);
    }
    pi = p;
    qi = q;
}

}  // namespace

void injections_serial(const Mat& G, const Mat& B, const Vec& theta, const Vec& v, Vec& p, Vec& q) {
    const Eigen::Index n = v.size();
    p.resize(n);
    q.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) row_sums(G, B, theta, v, i, p(i), q(i));
}

void injections_parallel(const Mat& G, const Mat& B, const Vec& theta, const Vec& v, Vec& p,
                         Vec& q) {
    const Eigen::Index n = v.size();
    p.resize(n);
    q.resize(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < n; ++i) row_sums(G, B, theta, v, i, p(i), q(i));
}

void injections(const Mat& G, const Mat& B, const Vec& theta, const Vec& v, Vec& p, Vec& q) {
    if (v.size() >= kParallelInjectionMin)
        injections_parallel(G, B, theta, v, p, q);
    else
        injections_serial(G, B, theta, v, p, q);
}

std::vector<double> eval_grid_serial(const Objective& f, const std::vector<double>& xs) {
    std::vector<double> out(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
    return out;
}

std::vector<double> eval_grid_parallel(const Objective& f, const std::vector<double>& xs) {
    std::vector<double> out(xs.size());
    const long n = static_cast<long>(xs.size());
#pragma omp parallel for schedule(dynamic)
    for (long i = 0; i < n; ++i) out[i] = f(xs[i]);
    return out;
}

}  // namespace mg::kernels
