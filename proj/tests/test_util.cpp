#include "test_util.hpp"

namespace mgtest {

mg::Mat random_stable(std::mt19937_64& rng, int n, double rho) {
    mg::Mat a = random_mat(rng, n, n);
    Eigen::EigenSolver<mg::Mat> es(a, false);
    const double r = es.eigenvalues().cwiseAbs().maxCoeff();
    return a * (rho / r);
}

}  // namespace mgtest
