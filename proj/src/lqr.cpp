#include "mg/lqr.hpp"

#include <algorithm>
#include <sstream>

namespace mg {

CostMatrices build_cost(const LqrWeights& w, int n) {
    if (w.q_v < 0 || w.q_sin < 0 || w.q_cos < 0 || w.q_omega < 0)
        throw ConfigError("LQR state weights must be >= 0");
    if (!(w.r_p > 0) || !(w.r_q > 0)) throw ConfigError("LQR input weights must be > 0");
    CostMatrices c{Mat::Zero(4 * n, 4 * n), Mat::Zero(2 * n, 2 * n)};
    const double qs[4] = {w.q_v, w.q_sin, w.q_cos, w.q_omega};
    for (int b = 0; b < 4; ++b) c.Q.block(b * n, b * n, n, n).diagonal().setConstant(qs[b]);
    c.R.topLeftCorner(n, n).diagonal().setConstant(w.r_p);
    c.R.bottomRightCorner(n, n).diagonal().setConstant(w.r_q);
    return c;
}

namespace {

Mat riccati_map(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& S) {
    const Mat M = R + B.transpose() * S * B;
    Eigen::LLT<Mat> llt(M);
    if (llt.info() != Eigen::Success) throw RiccatiError("R + B'SB is not positive definite", 0.0);
    const Mat BtSA = B.transpose() * S * A;
    Mat Sn = A.transpose() * S * A - BtSA.transpose() * llt.solve(BtSA) + Q;
    return 0.5 * (Sn + Sn.transpose());
}

}  // namespace

Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const DareOptions& opt,
               const Mat* S0, int* iterations) {
    if (A.rows() != A.cols() || B.rows() != A.rows() || Q.rows() != A.rows() ||
        R.rows() != B.cols())
        throw RiccatiError("DARE dimension mismatch", 0.0);
    Mat S = (S0 && S0->rows() == A.rows() && S0->cols() == A.cols()) ? *S0 : Q;
    double rel = 0.0;
    for (int it = 1; it <= opt.max_iter; ++it) {
        const Mat Sn = riccati_map(A, B, Q, R, S);
        if (!Sn.allFinite()) throw RiccatiError("DARE iteration produced non-finite values", rel);
        const double d = (Sn - S).norm();
        const double ref = S.norm();
        rel = ref > 0.0 ? d / ref : d;
        S = Sn;
        if (d <= opt.tol * ref || d == 0.0) {
            if (iterations) *iterations = it;
            return S;
        }
    }
    std::ostringstream os;
    os << "DARE did not converge in " << opt.max_iter << " iterations (relative step " << rel << ")";
    throw RiccatiError(os.str(), rel);
}

double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& S) {
    return (riccati_map(A, B, Q, R, S) - S).norm();
}

Mat compute_gain(const Mat& A, const Mat& B, const Mat& S, const Mat& R) {
    const Mat M = B.transpose() * S * B + R;
    Eigen::FullPivLU<Mat> lu(M);
    if (!lu.isInvertible()) throw RiccatiError("B'SB + R is singular", 0.0);
    return lu.solve(B.transpose() * S * A);
}

Vec control_step(const Mat& K, const Vec& z, const Vec& u_lb, const Vec& u_ub) {
    Vec u = -(K * z);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = std::clamp(u(i), u_lb(i), u_ub(i));
    return u;
}

LqrController::LqrController(CostMatrices cost, Vec u_lb, Vec u_ub, DareOptions opt,
                             bool warm_start)
    : cost_(std::move(cost)), opt_(opt), warm_(warm_start) {
    if (u_lb.size() != u_ub.size() || (u_lb.array() >= u_ub.array()).any())
        throw ConfigError("saturation bounds need u_lb < u_ub");
    st_.u_lb = std::move(u_lb);
    st_.u_ub = std::move(u_ub);
}

bool LqrController::update(const Mat& A, const Mat& B) {
    try {
        const Mat* s0 = (warm_ && st_.S.size()) ? &st_.S : nullptr;
        Mat S = solve_dare(A, B, cost_.Q, cost_.R, opt_, s0);
        Mat K = compute_gain(A, B, S, cost_.R);
        st_.S = std::move(S);
        st_.K = std::move(K);
        last_error_.clear();
        return true;
    } catch (const RiccatiError& e) {
        last_error_ = e.what();
        return false;
    }
}

Vec LqrController::control(const Vec& z) const {
    if (!has_gain()) return Vec::Zero(st_.u_lb.size());
    return control_step(st_.K, z, st_.u_lb, st_.u_ub);
}

}  // namespace mg
