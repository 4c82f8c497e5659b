#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mg {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct NetworkError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    DivergenceError(const std::string& what, double t) : Error(what), time(t) {}
    double time;
};

struct IdentificationError : Error {
    using Error::Error;
};

struct RiccatiError : Error {
    RiccatiError(const std::string& what, double r) : Error(what), residual(r) {}
    double residual;
};

// Moore-Penrose pseudo-inverse; singular values below rel_tol * sigma_max are dropped.
Mat pinv(const Mat& a, double rel_tol = 1e-8);

bool all_finite(const Mat& a);

}  // namespace mg
