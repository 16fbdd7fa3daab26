// Serial reference vs OpenMP kernels at training-batch sizes.
// Rows = 256 (B + mu*B at the defaults), width = model dim.

#include "cmatch/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace {

using cmatch::Tensor2D;
namespace k = cmatch::kernels;

Tensor2D random_tensor(std::size_t rows, std::size_t cols, std::uint64_t seed) {
    Tensor2D t(rows, cols);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : t.values()) {
        v = u(rng);
    }
    return t;
}

template <auto Fn>
void bm_affine_forward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const Tensor2D x = random_tensor(n, d, 1);
    const Tensor2D w = random_tensor(d, d, 2);
    const Tensor2D b = random_tensor(1, d, 3);
    Tensor2D y(n, d);
    for (auto _ : state) {
        Fn(x, w, b, y);
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * d * d));
}

template <auto Fn>
void bm_affine_backward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const Tensor2D x = random_tensor(n, d, 1);
    const Tensor2D w = random_tensor(d, d, 2);
    const Tensor2D dy = random_tensor(n, d, 3);
    Tensor2D dx(n, d), dw(d, d), db(1, d);
    for (auto _ : state) {
        Fn(x, w, dy, &dx, dw, db);
        benchmark::DoNotOptimize(dw.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 2 * n * d * d));
}

template <auto Fn>
void bm_segment_mean(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const std::size_t len = 15;
    const Tensor2D x = random_tensor(n * len, d, 1);
    std::vector<std::size_t> offsets;
    for (std::size_t s = 0; s <= n; ++s) {
        offsets.push_back(s * len);
    }
    Tensor2D out(n, d);
    for (auto _ : state) {
        Fn(x, offsets, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Fn>
void bm_tanh(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto d = static_cast<std::size_t>(state.range(1));
    const Tensor2D x = random_tensor(n, d, 1);
    Tensor2D y(n, d);
    for (auto _ : state) {
        Fn(x, y);
        benchmark::DoNotOptimize(y.data());
    }
}

void shapes(benchmark::internal::Benchmark* b) {
    b->Args({256, 64})->Args({1024, 64})->Args({256, 128});
}

} // namespace

BENCHMARK(bm_affine_forward<k::serial::affine_forward>)->Name("affine_forward/serial")->Apply(shapes);
BENCHMARK(bm_affine_forward<k::parallel::affine_forward>)->Name("affine_forward/parallel")->Apply(shapes);
BENCHMARK(bm_affine_backward<k::serial::affine_backward>)->Name("affine_backward/serial")->Apply(shapes);
BENCHMARK(bm_affine_backward<k::parallel::affine_backward>)->Name("affine_backward/parallel")->Apply(shapes);
BENCHMARK(bm_segment_mean<k::serial::segment_mean>)->Name("segment_mean/serial")->Apply(shapes);
BENCHMARK(bm_segment_mean<k::parallel::segment_mean>)->Name("segment_mean/parallel")->Apply(shapes);
BENCHMARK(bm_tanh<k::serial::tanh_forward>)->Name("tanh/serial")->Apply(shapes);
BENCHMARK(bm_tanh<k::parallel::tanh_forward>)->Name("tanh/parallel")->Apply(shapes);

BENCHMARK_MAIN();
