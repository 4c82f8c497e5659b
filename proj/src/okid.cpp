#include "mg/okid.hpp"

#include "mg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>

namespace mg {

HankelLayout parse_hankel_layout(const std::string& s) {
    if (s == "triangular") return HankelLayout::Triangular;
    if (s == "classical") return HankelLayout::Classical;
    throw ConfigError("unknown hankel_layout '" + s + "'");
}

void validate(const OkidConfig& c, double ts) {
    if (c.N < 1) throw ConfigError("window_n must be >= 1");
    if (!(c.eta > 0.0 && c.eta <= 1.0)) throw ConfigError("eta must be in (0, 1]");
    if (!(c.t_opt > ts)) throw ConfigError("t_opt must exceed the secondary step");
    if (!(c.gamma0 >= 0.0 && c.gamma0 <= 1.0)) throw ConfigError("gamma0 must be in [0, 1]");
    if (c.rank_r < 0) throw ConfigError("rank_r must be >= 1 (or 0 for automatic)");
    if (!(c.ridge >= 0.0)) throw ConfigError("ridge must be >= 0");
}

MeasurementWindow make_window(Mat theta, Mat v, Mat omega, Mat u) {
    const auto N = theta.cols();
    if (N < 1 || v.cols() != N || omega.cols() != N || u.cols() != N)
        throw IdentificationError("window matrices must share a positive column count");
    if (v.rows() != theta.rows() || omega.rows() != theta.rows())
        throw IdentificationError("window angle/voltage/frequency rows differ");
    MeasurementWindow w{std::move(theta), std::move(v), std::move(omega), std::move(u), {}, {}};
    w.theta_l = w.theta.col(0);
    w.v_l = w.v.col(0);
    return w;
}

Vec lift_observables(const Vec& theta, const Vec& v, const Vec& omega, const Vec& theta_anchor,
                     double v_nom, double omega_nom) {
    const auto n = theta.size();
    Vec z(4 * n);
    for (Eigen::Index i = 0; i < n; ++i) {
        z(i) = v(i) - v_nom;
        z(n + i) = std::sin(theta(i)) - std::sin(theta_anchor(i));
        z(2 * n + i) = std::cos(theta(i)) - std::cos(theta_anchor(i));
        z(3 * n + i) = omega(i) - omega_nom;
    }
    return z;
}

LiftedData lift_window(const MeasurementWindow& w, double v_nom, double omega_nom) {
    const auto n = w.theta.rows();
    const int N = w.N();
    LiftedData d{Mat(4 * n, N), Mat(2 * n, N)};
    for (int j = 0; j < N; ++j) {
        d.Z.col(j) = lift_observables(w.theta.col(j), w.v.col(j), w.omega.col(j), w.theta_l,
                                      v_nom, omega_nom);
        d.Y.col(j).head(n) = w.theta.col(j) - w.theta_l;
        d.Y.col(j).tail(n) = w.v.col(j) - w.v_l;
    }
    return d;
}

Mat input_toeplitz(const Mat& U, int blocks) {
    const auto m = U.rows();
    const auto N = U.cols();
    Mat T = Mat::Zero(m * blocks, N);
    for (int i = 0; i < blocks; ++i)
        for (Eigen::Index c = i; c < N; ++c) T.block(i * m, c, m, 1) = U.col(c - i);
    return T;
}

std::vector<Mat> estimate_markov(const Mat& Y, const Mat& U, double ridge, int blocks) {
    if (Y.cols() != U.cols()) throw IdentificationError("Y and U column counts differ");
    if (blocks < 1) throw IdentificationError("need at least one Markov block");
    if (U.size() == 0 || U.isZero(0.0)) throw IdentificationError("unexcited system");
    const auto m = U.rows();
    const Mat h = Y * pinv(input_toeplitz(U, blocks), ridge);
    std::vector<Mat> out;
    out.reserve(blocks);
    for (int i = 0; i < blocks; ++i) out.push_back(h.middleCols(i * m, m));
    return out;
}

Hankels build_hankels(const std::vector<Mat>& h, HankelLayout layout, int N) {
    if (h.empty()) throw IdentificationError("no Markov parameters");
    const auto p = h[0].rows();
    const auto m = h[0].cols();
    Hankels out;
    if (layout == HankelLayout::Triangular) {
        if (static_cast<int>(h.size()) < N + 1)
            throw IdentificationError("triangular Hankel layout needs N+1 Markov blocks");
        out.block_rows = N;
        out.H = Mat::Zero(p * N, m * N);
        out.Hp = Mat::Zero(p * N, m * N);
        for (int i = 0; i < N; ++i)
            for (int j = i; j < N; ++j) {
                out.H.block(i * p, j * m, p, m) = h[j - i];
                out.Hp.block(i * p, j * m, p, m) = h[j - i + 1];
            }
    } else {
        const int q = static_cast<int>(h.size()) / 2;
        if (q < 1) throw IdentificationError("classical Hankel layout needs two Markov blocks");
        out.block_rows = q;
        out.H = Mat(p * q, m * q);
        out.Hp = Mat(p * q, m * q);
        for (int i = 0; i < q; ++i)
            for (int j = 0; j < q; ++j) {
                out.H.block(i * p, j * m, p, m) = h[i + j];
                out.Hp.block(i * p, j * m, p, m) = h[i + j + 1];
            }
    }
    return out;
}

TruncatedSvd truncated_svd(const Mat& H, int rank_r, double rel_tol) {
    const auto lim = std::min(H.rows(), H.cols());
    if (rank_r < 1 || rank_r > lim)
        throw IdentificationError("truncation rank must be in [1, min(rows, cols)]");
    Eigen::JacobiSVD<Mat> svd(H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    int r = 0;
    const double cut = rel_tol * s(0);
    while (r < rank_r && s(r) > cut && s(r) > 0.0) ++r;
    if (r == 0) throw IdentificationError("Hankel matrix is numerically zero");
    TruncatedSvd out{svd.matrixU().leftCols(r), s.head(r), svd.matrixV().leftCols(r), r < rank_r};
    for (int i = 0; i < r; ++i) {
        Eigen::Index k;
        out.U.col(i).cwiseAbs().maxCoeff(&k);
        if (out.U(k, i) < 0.0) {
            out.U.col(i) *= -1.0;
            out.V.col(i) *= -1.0;
        }
    }
    return out;
}

Mat estimate_C(const Mat& Y, const Mat& Z, double ridge) { return Y * pinv(Z, ridge); }

namespace {

Vec spow(const Vec& s, double e) { return s.array().pow(e).matrix(); }

// M * kron(I_q, X)
Mat times_block_diag(const Mat& M, const Mat& X, int q) {
    Mat out(M.rows(), X.cols() * q);
    for (int j = 0; j < q; ++j)
        out.middleCols(j * X.cols(), X.cols()) = M.middleCols(j * X.rows(), X.rows()) * X;
    return out;
}

Mat pad_rows(const Mat& a, Eigen::Index rows) {
    Mat out = Mat::Zero(rows, a.cols());
    const auto k = std::min(rows, a.rows());
    out.topRows(k) = a.topRows(k);
    return out;
}

Mat pad_cols(const Mat& a, Eigen::Index cols) {
    Mat out = Mat::Zero(a.rows(), cols);
    const auto k = std::min(cols, a.cols());
    out.leftCols(k) = a.leftCols(k);
    return out;
}

struct GammaProblem {
    const TruncatedSvd& svd;
    Mat left;  // U^T kron(I, C^+T)
    int n_s, n_u, q;
    double ridge;

    double operator()(double g) const {
        const Mat lhs = spow(svd.s, 2.0 * g - 1.0).asDiagonal() * left;
        const Mat Bp = pinv(b_candidate(svd, g, n_s, n_u), ridge);
        const Mat rhs = times_block_diag(svd.V.transpose(), Bp, q);
        return (lhs - rhs).norm();
    }
};

GammaProblem make_problem(const TruncatedSvd& svd, const Mat& C, int n_s, int n_u, int q,
                          double ridge) {
    if (C.cols() != n_s) throw IdentificationError("C must have n_s columns");
    if (svd.U.rows() != C.rows() * q || svd.V.rows() != static_cast<Eigen::Index>(n_u) * q)
        throw IdentificationError("SVD factors do not match the block structure");
    const Mat CpT = pinv(C, ridge).transpose();
    return {svd, times_block_diag(svd.U.transpose(), CpT, q), n_s, n_u, q, ridge};
}

}  // namespace

Mat b_candidate(const TruncatedSvd& svd, double gamma, int n_s, int n_u) {
    if (n_u > svd.V.rows()) throw IdentificationError("input dimension exceeds Hankel columns");
    const Mat full = spow(svd.s, 1.0 - gamma).asDiagonal() * svd.V.transpose();
    return pad_rows(full.leftCols(n_u), n_s);
}

double gamma_objective(const TruncatedSvd& svd, const Mat& C, int n_s, int n_u, int blocks,
                       double gamma, double ridge) {
    return make_problem(svd, C, n_s, n_u, blocks, ridge)(gamma);
}

GammaSearch optimize_gamma(const TruncatedSvd& svd, const Mat& C, int n_s, int n_u, int blocks,
                           double prev_gamma, double ridge, bool parallel) {
    const GammaProblem f = make_problem(svd, C, n_s, n_u, blocks, ridge);
    std::vector<double> xs(101);
    for (int i = 0; i <= 100; ++i) xs[i] = i / 100.0;
    const kernels::Objective obj = [&f](double g) { return f(g); };
    const std::vector<double> fs =
        parallel ? kernels::eval_grid_parallel(obj, xs) : kernels::eval_grid_serial(obj, xs);

    GammaSearch out;
    if (std::any_of(fs.begin(), fs.end(), [](double v) { return !std::isfinite(v); })) {
        out.gamma = prev_gamma;
        out.fallback = true;
        return out;
    }
    const auto [lo_it, hi_it] = std::minmax_element(fs.begin(), fs.end());
    if (*hi_it - *lo_it <= 1e-12) {
        out.gamma = 0.5;
        out.flat = true;
        return out;
    }
    const auto best = static_cast<int>(lo_it - fs.begin());
    double a = xs[std::max(best - 1, 0)];
    double b = xs[std::min(best + 1, 100)];
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-9) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    const double g = 0.5 * (a + b);
    const double fg = f(g);
    out.gamma = (std::isfinite(fg) && fg <= *lo_it) ? g : xs[best];
    return out;
}

double update_gamma(double prev, double gamma_minus, double eta, long k, long t_opt_steps) {
    double g = prev;
    if (t_opt_steps > 0 && k > 0 && k % t_opt_steps == 0)
        g = eta * gamma_minus + (1.0 - eta) * prev;
    return std::clamp(g, 0.0, 1.0);
}

Realization realize_AB(const TruncatedSvd& svd, const Mat& Hp, double gamma, double eta,
                       const Mat* prev_A, const Mat* prev_B, int n_s, int n_u, int n_y) {
    if ((svd.s.array() <= 0.0).any() && gamma > 0.0)
        throw IdentificationError("zero singular value in realization");
    const Mat A_r = spow(svd.s, -gamma).asDiagonal() * svd.U.transpose() * Hp * svd.V *
                    spow(svd.s, gamma - 1.0).asDiagonal();
    Realization out;
    out.A = Mat::Zero(n_s, n_s);
    const auto r = std::min<Eigen::Index>(A_r.rows(), n_s);
    out.A.topLeftCorner(r, r) = A_r.topLeftCorner(r, r);
    out.B = b_candidate(svd, gamma, n_s, n_u);
    out.C = pad_cols((svd.U * spow(svd.s, gamma).asDiagonal()).topRows(n_y), n_s);
    if (prev_A && prev_A->rows() == n_s && prev_A->cols() == n_s)
        out.A = eta * out.A + (1.0 - eta) * (*prev_A);
    if (prev_B && prev_B->rows() == out.B.rows() && prev_B->cols() == out.B.cols())
        out.B = eta * out.B + (1.0 - eta) * (*prev_B);
    return out;
}

IdentifiedModel okid_step(const Mat& Y, const Mat& U, const Mat& Z, const OkidConfig& cfg,
                          OkidState& st, bool enhanced, long t_opt_steps, OkidStepInfo* info) {
    const int n_s = static_cast<int>(Z.rows());
    const int n_u = static_cast<int>(U.rows());
    const int n_y = static_cast<int>(Y.rows());
    const int N = static_cast<int>(Y.cols());
    if (st.k == 0 && !st.has_prev) st.gamma = cfg.gamma0;

    const int blocks = cfg.layout == HankelLayout::Triangular ? N + 1 : N;
    const std::vector<Mat> h = estimate_markov(Y, U, cfg.ridge, blocks);
    const Hankels hk = build_hankels(h, cfg.layout, N);
    const int lim = static_cast<int>(std::min(hk.H.rows(), hk.H.cols()));
    const int r = std::min({cfg.rank_r > 0 ? cfg.rank_r : n_s, n_s, lim});
    const TruncatedSvd svd = truncated_svd(hk.H, r);
    const Mat C = estimate_C(Y, Z, cfg.ridge);

    OkidStepInfo local;
    OkidStepInfo& inf = info ? *info : local;
    inf = OkidStepInfo{};
    if (svd.rank_reduced) inf.warnings.push_back("Hankel rank below requested truncation rank");

    double gamma = enhanced ? st.gamma : 0.5;
    if (enhanced && t_opt_steps > 0 && st.k > 0 && st.k % t_opt_steps == 0) {
        const GammaSearch gs =
            optimize_gamma(svd, C, n_s, n_u, hk.block_rows, st.gamma, cfg.ridge);
        if (gs.fallback) inf.warnings.push_back("non-finite gamma objective; gamma held");
        inf.gamma_minus = gs.gamma;
        gamma = update_gamma(st.gamma, gs.gamma, cfg.eta, st.k, t_opt_steps);
        inf.gamma_updated = true;
    }

    const Realization re = realize_AB(svd, hk.Hp, gamma, cfg.eta, st.has_prev ? &st.A : nullptr,
                                      st.has_prev ? &st.B : nullptr, n_s, n_u, n_y);
    st.A = re.A;
    st.B = re.B;
    st.has_prev = true;
    st.gamma = gamma;
    ++st.k;

    return IdentifiedModel{re.A, re.B, C, re.C, gamma, static_cast<int>(svd.s.size())};
}

IdentifiedModel conventional_okid(const MeasurementWindow& w, const OkidConfig& cfg, double v_nom,
                                  double omega_nom) {
    const LiftedData d = lift_window(w, v_nom, omega_nom);
    OkidState st;
    return okid_step(d.Y, w.u, d.Z, cfg, st, false, 0);
}

IdentifiedModel edmdc_fit(const Mat& Z, const Mat& U, const Mat& Y, double ridge) {
    const auto n_s = Z.rows();
    const auto n_u = U.rows();
    const auto N = Z.cols();
    IdentifiedModel m;
    m.rank_r = static_cast<int>(n_s);
    if (N < 2) throw IdentificationError("EDMDc needs at least two samples");
    Mat X(n_s + n_u, N - 1);
    X.topRows(n_s) = Z.leftCols(N - 1);
    X.bottomRows(n_u) = U.rightCols(N - 1);
    const Mat AB = Z.rightCols(N - 1) * pinv(X, ridge);
    m.A = AB.leftCols(n_s);
    m.B = AB.rightCols(n_u);
    m.C = estimate_C(Y, Z, ridge);
    m.C_realized = m.C;
    return m;
}

IdentifiedModel edmdc_baseline(const MeasurementWindow& w, double ridge, double v_nom,
                               double omega_nom) {
    const LiftedData d = lift_window(w, v_nom, omega_nom);
    return edmdc_fit(d.Z, w.u, d.Y, ridge);
}

Prediction predict_one_step(const IdentifiedModel& m, const Vec& z, const Vec& u) {
    Prediction p;
    p.z = m.A * z + m.B * u;
    p.y = m.C * p.z;
    return p;
}

double prediction_error(const Vec& v_true, const Vec& v_pred) {
    return (v_true - v_pred).norm() / static_cast<double>(v_true.size());
}

namespace {

void write_mat(std::ostream& os, const char* name, const Mat& a) {
    os << name << ' ' << a.rows() << ' ' << a.cols() << '\n';
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
        for (Eigen::Index j = 0; j < a.cols(); ++j) os << (j ? " " : "") << a(i, j);
        os << '\n';
    }
}

Mat read_mat(std::istream& is, const char* name) {
    std::string tag;
    Eigen::Index r = 0, c = 0;
    if (!(is >> tag >> r >> c) || tag != name || r < 0 || c < 0)
        throw Error(std::string("model file: expected matrix ") + name);
    Mat a(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j)
            if (!(is >> a(i, j))) throw Error(std::string("model file: short matrix ") + name);
    return a;
}

}  // namespace

void write_model(std::ostream& os, const IdentifiedModel& m) {
    const auto prec = os.precision(std::numeric_limits<double>::max_digits10);
    os << "identified_model " << m.A.rows() << ' ' << m.B.cols() << ' ' << m.C.rows() << ' '
       << m.rank_r << ' ' << m.gamma_opt << '\n';
    write_mat(os, "A", m.A);
    write_mat(os, "B", m.B);
    write_mat(os, "C", m.C);
    write_mat(os, "C_realized", m.C_realized);
    os.precision(prec);
}

IdentifiedModel read_model(std::istream& is) {
    std::string tag;
    long n_s = 0, n_u = 0, n_y = 0;
    IdentifiedModel m;
    if (!(is >> tag >> n_s >> n_u >> n_y >> m.rank_r >> m.gamma_opt) || tag != "identified_model")
        throw Error("model file: bad header");
    m.A = read_mat(is, "A");
    m.B = read_mat(is, "B");
    m.C = read_mat(is, "C");
    m.C_realized = read_mat(is, "C_realized");
    if (m.A.rows() != n_s || m.B.cols() != n_u || m.C.rows() != n_y)
        throw Error("model file: dimensions disagree with header");
    return m;
}

}  // namespace mg
