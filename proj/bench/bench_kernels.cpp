// Serial reference kernels against the OpenMP ones on the image-bandit shapes.

#include "cnnucb/datasets.hpp"
#include "cnnucb/fc.hpp"
#include "cnnucb/kernels.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace cnnucb;

namespace {

// MNIST-shaped rounds: 10 block arms of a random 28 x 28 image.
std::vector<Matrix> block_arms(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Matrix> arms;
    for (std::size_t i = 0; i < n; ++i) {
        Matrix img(1, 784);
        for (Eigen::Index j = 0; j < img.size(); ++j) img(0, j) = u(rng);
        arms.push_back(build_round(img, int(i % 10), 10).arms[i % 10]);
    }
    return arms;
}

struct CnnCase {
    NetTopology topo;
    CnnParams params;
    TrainingHistory history;

    explicit CnnCase(int m, std::size_t samples)
        : topo(NetTopology::grid(3, m, 4, 10, 28, 28)), params(init_params(topo, 1)) {
        for (auto& x : block_arms(samples, 2)) history.append(std::move(x), 0.5);
    }
};

void BM_LossGradient(benchmark::State& state) {
    CnnCase c(int(state.range(0)), std::size_t(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(kernels::loss_gradient(c.params, c.topo, c.history));
    state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_LossGradientReference(benchmark::State& state) {
    CnnCase c(int(state.range(0)), std::size_t(state.range(1)));
    for (auto _ : state)
        benchmark::DoNotOptimize(kernels::loss_gradient_reference(c.params, c.topo, c.history));
    state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_ScoreArms(benchmark::State& state) {
    CnnCase c(int(state.range(0)), 10);
    Vector f;
    Matrix g;
    for (auto _ : state) {
        kernels::outputs_and_gradients(c.params, c.topo, c.history.contexts(), f, g);
        benchmark::DoNotOptimize(g.data());
    }
    state.SetItemsProcessed(state.iterations() * 10);
}

void BM_ScoreArmsReference(benchmark::State& state) {
    CnnCase c(int(state.range(0)), 10);
    Vector f;
    Matrix g;
    for (auto _ : state) {
        kernels::outputs_and_gradients_reference(c.params, c.topo, c.history.contexts(), f, g);
        benchmark::DoNotOptimize(g.data());
    }
    state.SetItemsProcessed(state.iterations() * 10);
}

struct FcCase {
    FcTopology topo;
    Vector theta;
    std::vector<Vector> contexts;
    std::vector<double> rewards;

    explicit FcCase(std::size_t samples) {
        topo.input_dim = 7840;
        theta = fc_init_params(topo, 1);
        for (auto& x : block_arms(samples, 3)) {
            contexts.push_back(flatten(x));
            rewards.push_back(0.5);
        }
    }
};

void BM_FcLossGradient(benchmark::State& state) {
    FcCase c(std::size_t(state.range(0)));
    Vector g;
    for (auto _ : state)
        benchmark::DoNotOptimize(fc_loss_gradient(c.theta, c.topo, c.contexts, c.rewards, {}, g));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_FcLossGradientReference(benchmark::State& state) {
    FcCase c(std::size_t(state.range(0)));
    Vector g;
    for (auto _ : state)
        benchmark::DoNotOptimize(
            fc_loss_gradient_reference(c.theta, c.topo, c.contexts, c.rewards, {}, g));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

} // namespace

BENCHMARK(BM_LossGradient)->Args({8, 64})->Args({20, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradientReference)->Args({8, 64})->Args({20, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreArms)->Arg(8)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ScoreArmsReference)->Arg(8)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FcLossGradient)->Arg(64)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_FcLossGradientReference)->Arg(64)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
