#pragma once

#include "mg/core.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace mg {

enum class HankelLayout { Triangular, Classical };

HankelLayout parse_hankel_layout(const std::string& s);

struct OkidConfig {
    int N = 9;
    double eta = 1.0 / 9.0;
    double t_opt = 0.6;
    double gamma0 = 0.5;
    int rank_r = 0;  // 0: use the lifted dimension
    double ridge = 1e-8;
    HankelLayout layout = HankelLayout::Triangular;
};

void validate(const OkidConfig& cfg, double ts);

// Columns are consecutive secondary samples. u.col(j) is the input sent one step
// before sample j, so that y_j = sum_i h_i u_{j+1-i}.
struct MeasurementWindow {
    Mat theta;
    Mat v;
    Mat omega;  // rad/s
    Mat u;
    Vec theta_l;
    Vec v_l;

    int N() const { return static_cast<int>(theta.cols()); }
};

MeasurementWindow make_window(Mat theta, Mat v, Mat omega, Mat u);

struct LiftedData {
    Mat Z;
    Mat Y;
};

Vec lift_observables(const Vec& theta, const Vec& v, const Vec& omega, const Vec& theta_anchor,
                     double v_nom, double omega_nom);

LiftedData lift_window(const MeasurementWindow& w, double v_nom, double omega_nom);

// Block upper-triangular input Toeplitz with `blocks` block rows.
Mat input_toeplitz(const Mat& U, int blocks);

std::vector<Mat> estimate_markov(const Mat& Y, const Mat& U, double ridge, int blocks);

struct Hankels {
    Mat H;
    Mat Hp;
    int block_rows = 0;
};

// Triangular layout uses h_1..h_{N+1}; classical uses q = floor(h.size()/2) block rows/cols.
Hankels build_hankels(const std::vector<Mat>& h, HankelLayout layout, int N);

struct TruncatedSvd {
    Mat U;
    Vec s;
    Mat V;
    bool rank_reduced = false;
};

TruncatedSvd truncated_svd(const Mat& H, int rank_r, double rel_tol = 1e-8);

Mat estimate_C(const Mat& Y, const Mat& Z, double ridge);

// Candidate input map for a given gamma: top n_s x n_u block of S^(1-gamma) V^T,
// zero-padded to n_s rows.
Mat b_candidate(const TruncatedSvd& svd, double gamma, int n_s, int n_u);

double gamma_objective(const TruncatedSvd& svd, const Mat& C, int n_s, int n_u, int blocks,
                       double gamma, double ridge = 1e-8);

struct GammaSearch {
    double gamma = 0.5;
    bool fallback = false;  // objective was non-finite; prev returned
    bool flat = false;
};

GammaSearch optimize_gamma(const TruncatedSvd& svd, const Mat& C, int n_s, int n_u, int blocks,
                           double prev_gamma, double ridge = 1e-8, bool parallel = true);

double update_gamma(double prev, double gamma_minus, double eta, long k, long t_opt_steps);

struct Realization {
    Mat A;
    Mat B;
    Mat C;  // first block row of U S^gamma
};

Realization realize_AB(const TruncatedSvd& svd, const Mat& Hp, double gamma, double eta,
                       const Mat* prev_A, const Mat* prev_B, int n_s, int n_u, int n_y);

struct IdentifiedModel {
    Mat A;
    Mat B;
    Mat C;           // Y Z^+, the observation map used for prediction
    Mat C_realized;  // output map of the realization itself
    double gamma_opt = 0.5;
    int rank_r = 0;
};

struct OkidState {
    bool has_prev = false;
    Mat A;
    Mat B;
    double gamma = 0.5;
    long k = 0;
};

struct OkidStepInfo {
    bool gamma_updated = false;
    double gamma_minus = 0.5;
    std::vector<std::string> warnings;
};

// One online identification step on lifted data; advances st.k.
// enhanced=false pins gamma at 1/2 (conventional OKID).
IdentifiedModel okid_step(const Mat& Y, const Mat& U, const Mat& Z, const OkidConfig& cfg,
                          OkidState& st, bool enhanced, long t_opt_steps,
                          OkidStepInfo* info = nullptr);

IdentifiedModel conventional_okid(const MeasurementWindow& w, const OkidConfig& cfg, double v_nom,
                                  double omega_nom);

IdentifiedModel edmdc_baseline(const MeasurementWindow& w, double ridge, double v_nom,
                               double omega_nom);

// Lifted-data form; U uses the same alignment as MeasurementWindow::u.
IdentifiedModel edmdc_fit(const Mat& Z, const Mat& U, const Mat& Y, double ridge);

struct Prediction {
    Vec z;
    Vec y;
};

Prediction predict_one_step(const IdentifiedModel& m, const Vec& z, const Vec& u);

double prediction_error(const Vec& v_true, const Vec& v_pred);

void write_model(std::ostream& os, const IdentifiedModel& m);
IdentifiedModel read_model(std::istream& is);

}  // namespace mg
