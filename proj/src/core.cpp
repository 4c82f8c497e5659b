#include "mg/core.hpp"

namespace mg {

Mat pinv(const Mat& a, double rel_tol) {
    if (a.size() == 0) return Mat::Zero(a.cols(), a.rows());
    Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double cut = rel_tol * (s.size() ? s(0) : 0.0);
    Vec inv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cut && s(i) > 0.0) inv(i) = 1.0 / s(i);
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

bool all_finite(const Mat& a) { return a.allFinite(); }

}  // namespace mg
