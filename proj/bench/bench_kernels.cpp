// OpenMP kernels against the serial reference loops.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <vector>

#include "rainfill/kernels.hpp"
#include "rainfill/rng.hpp"

namespace k = rainfill::kernels;

namespace {

std::vector<double> random_buffer(size_t n, uint64_t seed) {
    rainfill::Rng rng(seed);
    std::vector<double> v(n);
    rng.fill_normal(v);
    return v;
}

k::ConvGeometry conv_geometry(benchmark::State& state) {
    k::ConvGeometry g;
    g.batch = 8;
    g.in_channels = static_cast<int64_t>(state.range(0));
    g.out_channels = g.in_channels;
    g.in_size = {3, 16, 32};
    g.kernel = {3, 3, 3};
    g.padding = {1, 1, 1};
    return g;
}

void set_threads(benchmark::State& state) { omp_set_num_threads(static_cast<int>(state.range(1))); }

void BM_Conv3dOpenMP(benchmark::State& state) {
    set_threads(state);
    const auto g = conv_geometry(state);
    const auto x = random_buffer(g.batch * g.in_channels * g.in_volume(), 1);
    const auto w = random_buffer(g.out_channels * g.in_channels * g.kernel_volume(), 2);
    std::vector<double> y(g.batch * g.out_channels * g.out_volume());
    for (auto _ : state) {
        k::conv3d_forward(g, x, w, {}, y);
        benchmark::DoNotOptimize(y.data());
    }
}

void BM_Conv3dReference(benchmark::State& state) {
    const auto g = conv_geometry(state);
    const auto x = random_buffer(g.batch * g.in_channels * g.in_volume(), 1);
    const auto w = random_buffer(g.out_channels * g.in_channels * g.kernel_volume(), 2);
    std::vector<double> y(g.batch * g.out_channels * g.out_volume());
    for (auto _ : state) {
        k::reference::conv3d_forward(g, x, w, {}, y);
        benchmark::DoNotOptimize(y.data());
    }
}

k::ConvGeometry up_geometry(benchmark::State& state) {
    k::ConvGeometry g;
    g.batch = 8;
    g.in_channels = static_cast<int64_t>(state.range(0));
    g.out_channels = 2 * g.in_channels;
    g.in_size = {3, 16, 32};
    g.kernel = {1, 2, 2};
    g.stride = {1, 2, 2};
    return g;
}

void BM_ConvTranspose3dOpenMP(benchmark::State& state) {
    set_threads(state);
    const auto g = up_geometry(state);
    const auto x = random_buffer(g.batch * g.out_channels * g.out_volume(), 3);
    const auto w = random_buffer(g.out_channels * g.in_channels * g.kernel_volume(), 4);
    std::vector<double> y(g.batch * g.in_channels * g.in_volume());
    for (auto _ : state) {
        k::conv_transpose3d_forward(g, x, w, {}, y);
        benchmark::DoNotOptimize(y.data());
    }
}

void BM_ConvTranspose3dReference(benchmark::State& state) {
    const auto g = up_geometry(state);
    const auto x = random_buffer(g.batch * g.out_channels * g.out_volume(), 3);
    const auto w = random_buffer(g.out_channels * g.in_channels * g.kernel_volume(), 4);
    std::vector<double> y(g.batch * g.in_channels * g.in_volume());
    for (auto _ : state) {
        k::reference::conv_transpose3d_forward(g, x, w, {}, y);
        benchmark::DoNotOptimize(y.data());
    }
}

k::GroupNormGeometry gn_geometry(benchmark::State& state) {
    k::GroupNormGeometry g;
    g.batch = 8;
    g.channels = state.range(0);
    g.groups = 4;
    g.spatial = 3 * 16 * 32;
    return g;
}

void BM_GroupNormOpenMP(benchmark::State& state) {
    set_threads(state);
    const auto g = gn_geometry(state);
    const size_t n = g.batch * g.channels * g.spatial;
    const auto x = random_buffer(n, 5);
    const std::vector<double> gamma(g.channels, 1.0), beta(g.channels, 0.0);
    std::vector<double> xhat(n), y(n), inv(g.batch * g.groups);
    for (auto _ : state) {
        k::group_norm_forward(g, x, gamma, beta, xhat, inv, y);
        benchmark::DoNotOptimize(y.data());
    }
}

void BM_GroupNormReference(benchmark::State& state) {
    const auto g = gn_geometry(state);
    const size_t n = g.batch * g.channels * g.spatial;
    const auto x = random_buffer(n, 5);
    const std::vector<double> gamma(g.channels, 1.0), beta(g.channels, 0.0);
    std::vector<double> y(n);
    for (auto _ : state) {
        k::reference::group_norm_forward(g, x, gamma, beta, y);
        benchmark::DoNotOptimize(y.data());
    }
}

void BM_MaxPoolOpenMP(benchmark::State& state) {
    set_threads(state);
    k::PoolGeometry g{8 * state.range(0), {3, 16, 32}, {1, 2, 2}};
    const auto x = random_buffer(g.planes * 3 * 16 * 32, 6);
    std::vector<double> y(g.planes * 3 * 8 * 16);
    std::vector<int64_t> arg(y.size());
    for (auto _ : state) {
        k::maxpool3d_forward(g, x, y, arg);
        benchmark::DoNotOptimize(y.data());
    }
}

void BM_MaxPoolReference(benchmark::State& state) {
    k::PoolGeometry g{8 * state.range(0), {3, 16, 32}, {1, 2, 2}};
    const auto x = random_buffer(g.planes * 3 * 16 * 32, 6);
    std::vector<double> y(g.planes * 3 * 8 * 16);
    for (auto _ : state) {
        k::reference::maxpool3d_forward(g, x, y);
        benchmark::DoNotOptimize(y.data());
    }
}

}  // namespace

BENCHMARK(BM_Conv3dOpenMP)->ArgsProduct({{16, 32}, {1, 2, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3dReference)->Args({16, 1})->Args({32, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvTranspose3dOpenMP)->ArgsProduct({{16, 32}, {1, 2, 4}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvTranspose3dReference)->Args({16, 1})->Args({32, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GroupNormOpenMP)->ArgsProduct({{16, 64}, {1, 2, 4}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_GroupNormReference)->Args({16, 1})->Args({64, 1})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxPoolOpenMP)->ArgsProduct({{16, 64}, {1, 2, 4}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxPoolReference)->Args({16, 1})->Args({64, 1})->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
