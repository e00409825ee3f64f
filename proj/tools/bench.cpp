// Benchmarks comparing the OpenMP kernels against the serial reference
// implementations on registration-sized grids.

#include <benchmark/benchmark.h>

#include "flowreg/gaussian.hpp"
#include "flowreg/grid.hpp"
#include "flowreg/objective.hpp"
#include "flowreg/reference.hpp"

using namespace flowreg;

namespace {

GridShape shape_2d() { return GridShape{{144, 160}}; }
GridShape shape_3d() { return GridShape{{32, 32, 32}}; }

Image bench_image(const GridShape& s, std::uint64_t seed) {
    Image img = make_image(s);
    std::uint64_t state = seed;
    for (double& v : img.values) {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        v = static_cast<double>(state >> 11) * 0x1.0p-53;
    }
    return img;
}

VoxelCloud bench_cloud(const GridShape& s, std::uint64_t seed) {
    VoxelCloud c = make_identity_grid(s);
    std::uint64_t state = seed;
    for (double& v : c.coords) {
        state = state * 6364136223846793005ULL + 1442695040888963407ULL;
        v += 2.0 * (static_cast<double>(state >> 11) * 0x1.0p-53) - 1.0;
    }
    return c;
}

void bm_warp_parallel(benchmark::State& state) {
    const auto s = state.range(0) == 2 ? shape_2d() : shape_3d();
    const Image img = bench_image(s, 1);
    const VoxelCloud c = bench_cloud(s, 2);
    for (auto _ : state) benchmark::DoNotOptimize(warp(img, c));
}

void bm_warp_serial(benchmark::State& state) {
    const auto s = state.range(0) == 2 ? shape_2d() : shape_3d();
    const Image img = bench_image(s, 1);
    const VoxelCloud c = bench_cloud(s, 2);
    for (auto _ : state) benchmark::DoNotOptimize(ref::warp(img, c));
}

void bm_smooth_parallel(benchmark::State& state) {
    const auto s = state.range(0) == 2 ? shape_2d() : shape_3d();
    const GaussianKernel k = make_kernel(2, 1.0, s.dim());
    VectorField f = make_field(s, s.dim());
    std::uint64_t st = 3;
    for (double& v : f.data) {
        st = st * 6364136223846793005ULL + 1442695040888963407ULL;
        v = static_cast<double>(st >> 11) * 0x1.0p-53;
    }
    for (auto _ : state) benchmark::DoNotOptimize(apply(k, f));
}

void bm_smooth_serial_dense(benchmark::State& state) {
    const auto s = state.range(0) == 2 ? shape_2d() : shape_3d();
    const GaussianKernel k = make_kernel(2, 1.0, s.dim());
    VectorField f = make_field(s, s.dim());
    std::uint64_t st = 3;
    for (double& v : f.data) {
        st = st * 6364136223846793005ULL + 1442695040888963407ULL;
        v = static_cast<double>(st >> 11) * 0x1.0p-53;
    }
    for (auto _ : state) benchmark::DoNotOptimize(ref::smooth_dense(k, f));
}

void bm_ncc_parallel(benchmark::State& state) {
    const auto s = shape_2d();
    const Image a = bench_image(s, 4);
    const Image b = bench_image(s, 5);
    for (auto _ : state) benchmark::DoNotOptimize(ncc(a, b, static_cast<int>(state.range(0))));
}

void bm_ncc_serial(benchmark::State& state) {
    const auto s = shape_2d();
    const Image a = bench_image(s, 4);
    const Image b = bench_image(s, 5);
    for (auto _ : state)
        benchmark::DoNotOptimize(ref::ncc(a, b, static_cast<int>(state.range(0))));
}

void bm_jacobian_parallel(benchmark::State& state) {
    const auto s = state.range(0) == 2 ? shape_2d() : shape_3d();
    const VoxelCloud c = bench_cloud(s, 6);
    for (auto _ : state) benchmark::DoNotOptimize(jacobian_det_map(c));
}

void bm_jacobian_serial(benchmark::State& state) {
    const auto s = state.range(0) == 2 ? shape_2d() : shape_3d();
    const VoxelCloud c = bench_cloud(s, 6);
    for (auto _ : state) benchmark::DoNotOptimize(ref::jacobian_det_map(c));
}

}  // namespace

BENCHMARK(bm_warp_parallel)->Arg(2)->Arg(3);
BENCHMARK(bm_warp_serial)->Arg(2)->Arg(3);
BENCHMARK(bm_smooth_parallel)->Arg(2)->Arg(3);
BENCHMARK(bm_smooth_serial_dense)->Arg(2)->Arg(3);
BENCHMARK(bm_ncc_parallel)->Arg(9)->Arg(21);
BENCHMARK(bm_ncc_serial)->Arg(9)->Arg(21);
BENCHMARK(bm_jacobian_parallel)->Arg(2)->Arg(3);
BENCHMARK(bm_jacobian_serial)->Arg(2)->Arg(3);

BENCHMARK_MAIN();
