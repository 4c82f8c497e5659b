#pragma once

#include "mg/core.hpp"

#include <functional>
#include <vector>

namespace mg::kernels {

// Row-wise power-flow sums. The serial version is the reference; the parallel one
// splits rows across OpenMP threads and produces bit-identical results.
void injections_serial(const Mat& G, const Mat& B, const Vec& theta, const Vec& v, Vec& p, Vec& q);
void injections_parallel(const Mat& G, const Mat& B, const Vec& theta, const Vec& v, Vec& p,
                         Vec& q);

// Below this size the thread fork costs more than the sums.
inline constexpr int kParallelInjectionMin = 64;

void injections(const Mat& G, const Mat& B, const Vec& theta, const Vec& v, Vec& p, Vec& q);

using Objective = std::function<double(double)>;

std::vector<double> eval_grid_serial(const Objective& f, const std::vector<double>& xs);
std::vector<double> eval_grid_parallel(const Objective& f, const std::vector<double>& xs);

}  // namespace mg::kernels
