#include "mg/stability.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace mg {

double spectral_radius(const Mat& M) {
    if (M.size() == 0) return 0.0;
    Eigen::EigenSolver<Mat> es(M, false);
    if (es.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<DiscMargin> compute_disc_margins(const Mat& Q, const Mat& R, const Mat& K, const Mat& B,
                                             const Mat& S) {
    Eigen::JacobiSVD<Mat> sq(Q), sk(K), sm(B.transpose() * S * B);
    const double q_min = sq.singularValues().minCoeff();
    const double k_max = sk.singularValues().maxCoeff();
    const double mu = sm.singularValues().maxCoeff();
    const double rho = k_max > 0.0 ? q_min / (k_max * k_max) : 0.0;

    std::vector<DiscMargin> out;
    for (Eigen::Index i = 0; i < R.rows(); ++i) {
        DiscMargin d;
        d.channel = static_cast<int>(i);
        d.rho = rho;
        d.mu = mu;
        const double r = R(i, i);
        d.center = 1.0 + r / mu;
        const double rad2 = d.center * d.center + (rho - r) / mu - 1.0;
        d.defined = std::isfinite(rad2) && rad2 >= 0.0;
        if (d.defined) {
            d.radius = std::sqrt(rad2);
            d.gain_lo = d.center - d.radius;
            d.gain_hi = d.center + d.radius;
            d.phase_hi = std::acos(std::clamp(mu / (mu + r), -1.0, 1.0));
            d.phase_lo = -d.phase_hi;
        }
        out.push_back(d);
    }
    return out;
}

BiboReport bibo_check(const Mat& A, const Mat& B, const Mat& K, const BiboOptions& opt) {
    BiboReport rep;
    const Mat Acl = A - B * K;
    rep.spectral_radius = spectral_radius(Acl);
    rep.flagged = !(rep.spectral_radius < 1.0);

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> ud(-opt.input_bound, opt.input_bound);
    const auto n = A.rows();
    const auto m = B.cols();
    Vec z = opt.z0.size() == n ? opt.z0 : Vec::Zero(n);
    const int half = opt.steps / 2;
    double first = z.norm(), second = 0.0;
    for (int k = 0; k < opt.steps; ++k) {
        Vec u = -(K * z);
        for (Eigen::Index i = 0; i < m; ++i) u(i) = std::clamp(u(i), -opt.u_bound, opt.u_bound);
        if (opt.input_bound > 0.0)
            for (Eigen::Index i = 0; i < m; ++i) u(i) += ud(rng);
        z = A * z + B * u;
        const double nz = z.norm();
        if (!std::isfinite(nz)) {
            rep.max_norm = std::numeric_limits<double>::infinity();
            return rep;
        }
        rep.max_norm = std::max(rep.max_norm, nz);
        (k < half ? first : second) = std::max(k < half ? first : second, nz);
    }
    // A bounded trajectory must not keep growing: the second half stays inside the
    // envelope reached during the first half.
    rep.bound = opt.growth * first + 1e-12;
    rep.bounded = second <= rep.bound;
    return rep;
}

}  // namespace mg
