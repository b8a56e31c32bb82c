#include <random>

#include <benchmark/benchmark.h>

#include "se3movf/frame.hpp"
#include "se3movf/gaussian.hpp"
#include "se3movf/network.hpp"

using namespace se3movf;

namespace {

Volume random_cube(int n, int c = 1) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<float> dist(-1, 1);
    Volume v(n, n, n, c);
    for (auto& x : v.data) x = dist(rng);
    return v;
}

} // namespace

static void BM_ConvAxis(benchmark::State& state) {
    const Volume v = random_cube(static_cast<int>(state.range(0)), 8);
    const auto k = make_kernel<float>(1.0, 0);
    for (auto _ : state) benchmark::DoNotOptimize(conv_axis(v, k, 0));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.data.size()));
}
BENCHMARK(BM_ConvAxis)->Arg(16)->Arg(32)->Arg(64);

static void BM_Jet2(benchmark::State& state) {
    const Volume v = random_cube(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(jet2(v, 1.0));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(v.voxels()));
}
BENCHMARK(BM_Jet2)->Arg(16)->Arg(29)->Arg(64);

static void BM_Eigh3(benchmark::State& state) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> dist(-1, 1);
    std::vector<Sym3> hs(1024);
    for (auto& h : hs) {
        h.xx = dist(rng); h.xy = dist(rng); h.yy = dist(rng);
        h.xz = dist(rng); h.yz = dist(rng); h.zz = dist(rng);
    }
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(eigh3(hs[i]));
        i = (i + 1) & 1023;
    }
}
BENCHMARK(BM_Eigh3);

static void BM_BuildFrame(benchmark::State& state) {
    const Volume jet = jet2(random_cube(static_cast<int>(state.range(0))), 2.0);
    for (auto _ : state) benchmark::DoNotOptimize(build_frame(jet, 1e-2));
    state.SetItemsProcessed(state.iterations() *
                            static_cast<std::int64_t>(jet.voxels()));
}
BENCHMARK(BM_BuildFrame)->Arg(16)->Arg(29);

static void BM_NetworkForward(benchmark::State& state) {
    ArchConfig a;
    a.num_classes = 2;
    BlockConfig b0;
    b0.channels = 8;
    b0.mlp_hidden = 8;
    b0.sigma = 1.0;
    BlockConfig b1 = b0;
    b1.residual = true;
    b1.stride = 2;
    BlockConfig b2;
    b2.channels = 16;
    b2.mlp_hidden = 16;
    b2.sigma = 1.0;
    b2.residual = true;
    a.blocks = {b0, b1, b2};
    std::mt19937_64 rng(3);
    auto p = init_params<float>(a, rng);
    const Volume v = random_cube(29);
    for (auto _ : state) benchmark::DoNotOptimize(network_forward(v, a, p));
}
BENCHMARK(BM_NetworkForward);

BENCHMARK_MAIN();
