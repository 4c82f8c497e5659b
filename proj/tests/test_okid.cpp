#include "mg/okid.hpp"
#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace mg;

namespace {

Mat orthonormal_cols(std::mt19937_64& rng, int rows, int cols) {
    Eigen::HouseholderQR<Mat> qr(mgtest::random_mat(rng, rows, rows));
    return qr.householderQ() * Mat::Identity(rows, cols);
}

std::vector<Mat> markov_of(const Mat& A, const Mat& B, const Mat& C, int count) {
    std::vector<Mat> h;
    Mat Ak = Mat::Identity(A.rows(), A.cols());
    for (int k = 0; k < count; ++k) {
        h.push_back(C * Ak * B);
        Ak = Ak * A;
    }
    return h;
}

// y_j = c x_j, x_j = a x_{j-1} + b u_j with u_j applied one step before sample j.
void simulate_lti(const Mat& A, const Mat& B, const Mat& C, const Mat& U, Mat& X, Mat& Y) {
    const auto N = U.cols();
    X.resize(A.rows(), N);
    Y.resize(C.rows(), N);
    Vec x = Vec::Zero(A.rows());
    for (Eigen::Index j = 0; j < N; ++j) {
        x = A * x + B * U.col(j);
        X.col(j) = x;
        Y.col(j) = C * x;
    }
}

}  // namespace

TEST_CASE("lifting examples") {
    const Vec th = Vec::Constant(2, 0.3), v = Vec::Constant(2, 1.0), w = Vec::Constant(2, 376.99);
    Vec z = lift_observables(th, v, w, th, 1.0, 376.99);
    CHECK(z.size() == 8);
    CHECK(z.cwiseAbs().maxCoeff() == 0.0);

    Vec pi(1), zero = Vec::Zero(1), one = Vec::Ones(1);
    pi << M_PI;
    z = lift_observables(pi, one, zero, zero, 1.0, 0.0);
    CHECK(std::abs(z(1)) < 1e-15);
    CHECK(z(2) == doctest::Approx(-2.0));
}

TEST_CASE("lifting is invertible through atan2") {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const Vec th = mgtest::random_vec(rng, 3, -10.0, 10.0);
        const Vec an = mgtest::random_vec(rng, 3, -3.0, 3.0);
        const Vec z = lift_observables(th, Vec::Ones(3), Vec::Zero(3), an, 1.0, 0.0);
        for (int i = 0; i < 3; ++i) {
            const double rec =
                std::atan2(z(3 + i) + std::sin(an(i)), z(6 + i) + std::cos(an(i)));
            CHECK(std::remainder(rec - th(i), 2.0 * M_PI) == doctest::Approx(0.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("window lifting uses the first sample as anchor") {
    std::mt19937_64 rng(4);
    const MeasurementWindow w =
        make_window(mgtest::random_mat(rng, 2, 5), mgtest::random_mat(rng, 2, 5),
                    mgtest::random_mat(rng, 2, 5), mgtest::random_mat(rng, 4, 5));
    CHECK(w.theta_l == w.theta.col(0));
    const LiftedData d = lift_window(w, 1.0, 0.0);
    CHECK(d.Z.rows() == 8);
    CHECK(d.Y.rows() == 4);
    CHECK(d.Y.col(0).cwiseAbs().maxCoeff() == 0.0);
    for (int j = 0; j < 5; ++j)
        CHECK(d.Z.col(j) == lift_observables(w.theta.col(j), w.v.col(j), w.omega.col(j),
                                             w.theta_l, 1.0, 0.0));
    CHECK_THROWS_AS(make_window(Mat(2, 5), Mat(2, 4), Mat(2, 5), Mat(4, 5)), IdentificationError);
}

TEST_CASE("impulse input gives Markov parameters directly") {
    Mat U = Mat::Zero(1, 6);
    U(0, 0) = 1.0;
    Mat Y(1, 6);
    Y << 0.3, -0.2, 0.7, 0.1, 0.05, -0.4;
    CHECK(input_toeplitz(U, 6) == Mat::Identity(6, 6));
    const auto h = estimate_markov(Y, U, 1e-8, 6);
    for (int k = 0; k < 6; ++k) CHECK(h[k](0, 0) == doctest::Approx(Y(0, k)).epsilon(1e-14));
}

TEST_CASE("scalar system Markov parameters are recovered") {
    std::mt19937_64 rng(8);
    Mat A(1, 1), B(1, 1), C(1, 1);
    A << 0.5;
    B << 1.0;
    C << 1.0;
    const Mat U = mgtest::random_mat(rng, 1, 9);
    Mat X, Y;
    simulate_lti(A, B, C, U, X, Y);
    const auto h = estimate_markov(Y, U, 1e-12, 9);
    for (int k = 0; k < 9; ++k) CHECK(std::abs(h[k](0, 0) - std::pow(0.5, k)) < 1e-8);
}

TEST_CASE("Markov estimate is the least-squares minimizer") {
    std::mt19937_64 rng(9);
    const Mat U = mgtest::random_mat(rng, 2, 12);
    const Mat Y = mgtest::random_mat(rng, 2, 12);
    const int blocks = 3;
    const auto h = estimate_markov(Y, U, 1e-12, blocks);
    Mat H(2, 6);
    for (int i = 0; i < blocks; ++i) H.middleCols(2 * i, 2) = h[i];
    const Mat T = input_toeplitz(U, blocks);
    const Mat normal = (T * T.transpose()).ldlt().solve(T * Y.transpose()).transpose();
    CHECK((H - normal).cwiseAbs().maxCoeff() < 1e-10);
    const double best = (Y - H * T).norm();
    for (int t = 0; t < 20; ++t) {
        const Mat other = H + 1e-3 * mgtest::random_mat(rng, 2, 6);
        CHECK((Y - other * T).norm() >= best);
    }
    CHECK_THROWS_WITH_AS(estimate_markov(Y, Mat::Zero(2, 12), 1e-8, 3), "unexcited system",
                         IdentificationError);
}

TEST_CASE("Hankel assembly") {
    std::vector<Mat> h;
    for (int k = 0; k < 6; ++k) h.push_back(Mat::Constant(1, 1, std::pow(0.5, k)));
    Hankels hk = build_hankels(h, HankelLayout::Triangular, 1);
    CHECK(hk.H(0, 0) == 1.0);
    CHECK(hk.Hp(0, 0) == 0.5);

    hk = build_hankels(h, HankelLayout::Triangular, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) {
            CHECK(hk.H(i, j) == (j >= i ? std::pow(0.5, j - i) : 0.0));
            CHECK(hk.Hp(i, j) == (j >= i ? std::pow(0.5, j - i + 1) : 0.0));
        }
    CHECK_THROWS_AS(build_hankels(h, HankelLayout::Triangular, 6), IdentificationError);

    hk = build_hankels(h, HankelLayout::Classical, 5);
    CHECK(hk.block_rows == 3);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(hk.H(i, j) == std::pow(0.5, i + j));

    std::vector<Mat> zeros(4, Mat::Zero(2, 2));
    hk = build_hankels(zeros, HankelLayout::Triangular, 3);
    CHECK(hk.H.isZero(0.0));
    CHECK(hk.Hp.isZero(0.0));
    CHECK_THROWS_AS(truncated_svd(hk.H, 2), IdentificationError);
}

TEST_CASE("truncated SVD") {
    std::mt19937_64 rng(10);
    const Vec u = mgtest::random_vec(rng, 5, -1, 1), v = mgtest::random_vec(rng, 4, -1, 1);
    const Mat R1 = u * v.transpose();
    TruncatedSvd s = truncated_svd(R1, 1);
    CHECK((s.U * s.s.asDiagonal() * s.V.transpose() - R1).cwiseAbs().maxCoeff() < 1e-12);

    const Mat H = mgtest::random_mat(rng, 6, 5);
    s = truncated_svd(H, 5);
    CHECK((s.U * s.s.asDiagonal() * s.V.transpose() - H).norm() <= 1e-10 * H.norm());
    for (int i = 1; i < 5; ++i) CHECK(s.s(i) <= s.s(i - 1));

    Eigen::JacobiSVD<Mat> full(H);
    const Vec sv = full.singularValues();
    s = truncated_svd(H, 2);
    const double err = (s.U * s.s.asDiagonal() * s.V.transpose() - H).norm();
    CHECK(std::abs(err - sv.tail(3).norm()) < 1e-10);

    s = truncated_svd(R1, 3);
    CHECK(s.s.size() == 1);
    CHECK(s.rank_reduced);
    CHECK_THROWS_AS(truncated_svd(H, 6), IdentificationError);
}

TEST_CASE("observation map estimate") {
    std::mt19937_64 rng(12);
    const Mat Y = mgtest::random_mat(rng, 3, 4);
    CHECK((estimate_C(Y, Mat::Identity(4, 4), 1e-8) - Y).cwiseAbs().maxCoeff() < 1e-14);
    const Mat C0 = mgtest::random_mat(rng, 3, 4), Z = mgtest::random_mat(rng, 4, 20);
    CHECK((estimate_C(C0 * Z, Z, 1e-12) - C0).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(estimate_C(Mat::Zero(3, 20), Z, 1e-8).isZero(0.0));
}

TEST_CASE("gamma objective is flat for unit singular values") {
    std::mt19937_64 rng(13);
    TruncatedSvd s{orthonormal_cols(rng, 6, 4), Vec::Ones(4), orthonormal_cols(rng, 6, 4), false};
    const Mat C = mgtest::random_mat(rng, 2, 4);
    const GammaSearch g = optimize_gamma(s, C, 4, 2, 3, 0.3);
    CHECK(g.flat);
    CHECK(g.gamma == 0.5);
}

TEST_CASE("gamma search agrees with a dense scan") {
    std::mt19937_64 rng(14);
    for (int trial = 0; trial < 10; ++trial) {
        Vec sv = mgtest::random_vec(rng, 4, 0.2, 5.0);
        std::sort(sv.data(), sv.data() + 4, std::greater<>());
        TruncatedSvd s{orthonormal_cols(rng, 6, 4), sv, orthonormal_cols(rng, 6, 4), false};
        const Mat C = mgtest::random_mat(rng, 2, 4);
        const GammaSearch g = optimize_gamma(s, C, 4, 2, 3, 0.5, 1e-8, trial % 2 == 0);
        double best = 0.0, fbest = std::numeric_limits<double>::infinity();
        for (int i = 0; i <= 1000; ++i) {
            const double f = gamma_objective(s, C, 4, 2, 3, i / 1000.0);
            if (f < fbest) {
                fbest = f;
                best = i / 1000.0;
            }
        }
        CHECK(g.gamma >= 0.0);
        CHECK(g.gamma <= 1.0);
        CHECK(std::abs(g.gamma - best) <= 0.01);
    }
}

TEST_CASE("non-finite gamma objective holds the previous value") {
    std::mt19937_64 rng(15);
    Vec sv(4);
    sv << 2.0, 1.0, 0.5, 0.0;
    TruncatedSvd s{orthonormal_cols(rng, 6, 4), sv, orthonormal_cols(rng, 6, 4), false};
    const GammaSearch g = optimize_gamma(s, mgtest::random_mat(rng, 2, 4), 4, 2, 3, 0.37);
    CHECK(g.fallback);
    CHECK(g.gamma == 0.37);
}

TEST_CASE("gamma update rule") {
    CHECK(update_gamma(0.5, 0.8, 1.0, 20, 20) == 0.8);
    CHECK(update_gamma(0.5, 0.59, 1.0 / 9.0, 20, 20) == doctest::Approx(0.51).epsilon(1e-12));
    CHECK(update_gamma(0.5, 0.59, 1.0 / 9.0, 21, 20) == 0.5);
    CHECK(update_gamma(0.5, 0.59, 1.0 / 9.0, 0, 20) == 0.5);
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    double g = 0.5;
    for (long k = 1; k < 500; ++k) {
        g = update_gamma(g, ud(rng), ud(rng), k, 3);
        REQUIRE(g >= 0.0);
        REQUIRE(g <= 1.0);
    }
}

TEST_CASE("realization reproduces Markov parameters for any gamma") {
    std::mt19937_64 rng(17);
    const Mat A = mgtest::random_stable(rng, 3, 0.8);
    const Mat B = mgtest::random_mat(rng, 3, 2), C = mgtest::random_mat(rng, 2, 3);
    const auto h = markov_of(A, B, C, 12);
    const Hankels hk = build_hankels(h, HankelLayout::Classical, 12);
    const TruncatedSvd s = truncated_svd(hk.H, 3);
    for (double g : {0.0, 0.25, 0.5, 0.8, 1.0}) {
        const Realization re = realize_AB(s, hk.Hp, g, 1.0, nullptr, nullptr, 3, 2, 2);
        Mat Ak = Mat::Identity(3, 3);
        for (int k = 0; k < 10; ++k) {
            CHECK((re.C * Ak * re.B - h[k]).norm() <= 1e-6 * h[k].norm());
            Ak = Ak * re.A;
        }
    }
}

TEST_CASE("scalar realization") {
    std::mt19937_64 rng(18);
    Mat A(1, 1), B(1, 1), C(1, 1);
    A << 0.5;
    B << 1.0;
    C << 1.0;
    const Mat U = mgtest::random_mat(rng, 1, 10);
    Mat X, Y;
    simulate_lti(A, B, C, U, X, Y);
    OkidConfig cfg;
    cfg.layout = HankelLayout::Classical;
    cfg.ridge = 1e-12;
    OkidState st;
    const IdentifiedModel m = okid_step(Y, U, X, cfg, st, false, 0);
    CHECK(std::abs(std::abs(m.A(0, 0)) - 0.5) < 1e-6);
    Mat Ak = Mat::Identity(1, 1);
    for (int k = 0; k < 10; ++k) {
        CHECK(std::abs((m.C_realized * Ak * m.B)(0, 0) - std::pow(0.5, k)) < 1e-6);
        Ak = Ak * m.A;
    }
    CHECK(std::abs(m.C(0, 0) - 1.0) < 1e-9);
}

TEST_CASE("smoothing and the gamma one-half reduction") {
    std::mt19937_64 rng(19);
    const Mat H = mgtest::random_mat(rng, 6, 6), Hp = mgtest::random_mat(rng, 6, 6);
    const TruncatedSvd s = truncated_svd(H, 4);
    const Realization fresh = realize_AB(s, Hp, 0.5, 1.0, nullptr, nullptr, 4, 2, 2);
    const Mat sh = s.s.array().sqrt().matrix().asDiagonal().inverse();
    const Mat conv = sh * s.U.transpose() * Hp * s.V * sh;
    CHECK((fresh.A - conv).cwiseAbs().maxCoeff() < 1e-12);

    const Mat pA = mgtest::random_mat(rng, 4, 4), pB = mgtest::random_mat(rng, 4, 2);
    const Realization sm = realize_AB(s, Hp, 0.5, 0.25, &pA, &pB, 4, 2, 2);
    CHECK((sm.A - (0.25 * fresh.A + 0.75 * pA)).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((sm.B - (0.25 * fresh.B + 0.75 * pB)).cwiseAbs().maxCoeff() < 1e-14);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
            CHECK(sm.A(i, j) >= std::min(fresh.A(i, j), pA(i, j)) - 1e-15);
            CHECK(sm.A(i, j) <= std::max(fresh.A(i, j), pA(i, j)) + 1e-15);
        }
    const Realization pure = realize_AB(s, Hp, 0.5, 1.0, &pA, &pB, 4, 2, 2);
    CHECK(pure.A == fresh.A);
}

TEST_CASE("enhanced and conventional pipelines coincide at the first step") {
    std::mt19937_64 rng(20);
    const MeasurementWindow w =
        make_window(0.1 * mgtest::random_mat(rng, 2, 9), Mat::Ones(2, 9) + 0.01 * mgtest::random_mat(rng, 2, 9),
                    0.1 * mgtest::random_mat(rng, 2, 9), 0.01 * mgtest::random_mat(rng, 4, 9));
    const OkidConfig cfg;
    const LiftedData d = lift_window(w, 1.0, 0.0);
    OkidState st;
    const IdentifiedModel e = okid_step(d.Y, w.u, d.Z, cfg, st, true, 20);
    const IdentifiedModel c = conventional_okid(w, cfg, 1.0, 0.0);
    CHECK((e.A - c.A).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((e.B - c.B).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((e.C - c.C).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(e.gamma_opt == 0.5);
    CHECK(all_finite(e.A));

    OkidState st2;
    const IdentifiedModel e2 = okid_step(d.Y, w.u, d.Z, cfg, st2, true, 20);
    CHECK(e2.A == e.A);
    CHECK(e2.B == e.B);
    CHECK(e2.C == e.C);
}

TEST_CASE("EDMDc recovers a linear system exactly") {
    std::mt19937_64 rng(21);
    const Mat A = mgtest::random_stable(rng, 4, 0.9), B = mgtest::random_mat(rng, 4, 2);
    const Mat U = mgtest::random_mat(rng, 2, 20);
    Mat Z(4, 20);
    Z.col(0) = mgtest::random_mat(rng, 4, 1);
    for (int j = 1; j < 20; ++j) Z.col(j) = A * Z.col(j - 1) + B * U.col(j);
    const IdentifiedModel m = edmdc_fit(Z, U, Z, 1e-14);
    CHECK((m.A - A).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((m.B - B).cwiseAbs().maxCoeff() < 1e-9);

    const IdentifiedModel z = edmdc_fit(Mat::Zero(4, 10), Mat::Zero(2, 10), Mat::Zero(2, 10), 1e-8);
    CHECK(z.A.isZero(0.0));
    CHECK(z.B.isZero(0.0));
    CHECK(z.C.isZero(0.0));

    const Prediction p = predict_one_step(m, Z.col(10), U.col(11));
    CHECK((p.z - Z.col(11)).norm() < 1e-10);
}

TEST_CASE("prediction with a zero state and input is zero") {
    std::mt19937_64 rng(22);
    IdentifiedModel m{mgtest::random_mat(rng, 4, 4), mgtest::random_mat(rng, 4, 2),
                      mgtest::random_mat(rng, 2, 4), Mat(), 0.5, 4};
    const Prediction p = predict_one_step(m, Vec::Zero(4), Vec::Zero(2));
    CHECK(p.z.isZero(0.0));
    CHECK(p.y.isZero(0.0));
}

TEST_CASE("prediction error metric") {
    const Vec a = Vec::Constant(3, 1.01);
    CHECK(prediction_error(a, a) == 0.0);
    Vec x(1), y(1);
    x << 1.02;
    y << 1.0;
    CHECK(prediction_error(x, y) == doctest::Approx(0.02));
}

TEST_CASE("model text round trip") {
    std::mt19937_64 rng(23);
    IdentifiedModel m{mgtest::random_mat(rng, 8, 8), mgtest::random_mat(rng, 8, 4),
                      mgtest::random_mat(rng, 4, 8), mgtest::random_mat(rng, 4, 8), 0.4375, 7};
    std::stringstream ss;
    write_model(ss, m);
    const IdentifiedModel r = read_model(ss);
    CHECK(r.A == m.A);
    CHECK(r.B == m.B);
    CHECK(r.C == m.C);
    CHECK(r.C_realized == m.C_realized);
    CHECK(r.gamma_opt == m.gamma_opt);
    CHECK(r.rank_r == 7);
    std::stringstream bad("identified_model 2 1 1 1 0.5\nA 3 3\n");
    CHECK_THROWS_AS(read_model(bad), Error);
}

TEST_CASE("config validation") {
    OkidConfig c;
    CHECK_NOTHROW(validate(c, 0.03));
    c.eta = 0.0;
    CHECK_THROWS_AS(validate(c, 0.03), ConfigError);
    c = OkidConfig{};
    c.t_opt = 0.02;
    CHECK_THROWS_AS(validate(c, 0.03), ConfigError);
    CHECK(parse_hankel_layout("classical") == HankelLayout::Classical);
    CHECK_THROWS_AS(parse_hankel_layout("block"), ConfigError);
}
