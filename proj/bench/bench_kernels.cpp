#include "mg/kernels.hpp"
#include "mg/okid.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

struct Net {
    mg::Mat G, B;
    mg::Vec th, v;
};

Net random_net(int n) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    Net x{mg::Mat(n, n), mg::Mat(n, n), mg::Vec(n), mg::Vec(n)};
    for (int i = 0; i < n; ++i) {
        x.th(i) = 0.1 * nd(rng);
        x.v(i) = 1.0 + 0.01 * nd(rng);
        for (int j = 0; j < n; ++j) {
            x.G(i, j) = nd(rng);
            x.B(i, j) = nd(rng);
        }
    }
    return x;
}

void BM_InjectionsSerial(benchmark::State& s) {
    const Net x = random_net(static_cast<int>(s.range(0)));
    mg::Vec p, q;
    for (auto _ : s) {
        mg::kernels::injections_serial(x.G, x.B, x.th, x.v, p, q);
        benchmark::DoNotOptimize(p.data());
    }
}

void BM_InjectionsParallel(benchmark::State& s) {
    const Net x = random_net(static_cast<int>(s.range(0)));
    mg::Vec p, q;
    for (auto _ : s) {
        mg::kernels::injections_parallel(x.G, x.B, x.th, x.v, p, q);
        benchmark::DoNotOptimize(p.data());
    }
}

struct GammaCase {
    mg::TruncatedSvd svd;
    mg::Mat C;
    int n_s, n_u, q;
};

// Sizes of one 4-bus identification step (n_s = 16, n_u = 8, N = 9).
GammaCase gamma_case() {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> nd;
    const int n_y = 8, n_u = 8, q = 9, n_s = 16;
    mg::Mat H(n_y * q, n_u * q);
    for (int i = 0; i < H.rows(); ++i)
        for (int j = 0; j < H.cols(); ++j) H(i, j) = nd(rng);
    mg::Mat C(n_y, n_s);
    for (int i = 0; i < n_y; ++i)
        for (int j = 0; j < n_s; ++j) C(i, j) = nd(rng);
    return {mg::truncated_svd(H, n_s), C, n_s, n_u, q};
}

void BM_GammaSearch(benchmark::State& s) {
    const GammaCase g = gamma_case();
    const bool parallel = s.range(0) != 0;
    for (auto _ : s) {
        auto r = mg::optimize_gamma(g.svd, g.C, g.n_s, g.n_u, g.q, 0.5, 1e-8, parallel);
        benchmark::DoNotOptimize(r.gamma);
    }
}

}  // namespace

BENCHMARK(BM_InjectionsSerial)->RangeMultiplier(4)->Range(4, 1024);
BENCHMARK(BM_InjectionsParallel)->RangeMultiplier(4)->Range(4, 1024);
BENCHMARK(BM_GammaSearch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
