#include "socpinn/model.hpp"
#include "socpinn/nn.hpp"
#include "socpinn/physics.hpp"

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

using namespace socpinn;

namespace {

model::NormStats bench_norm() {
    model::NormStats n;
    n.voltage = {3.0, 4.2};
    n.current = {-6.0, 2.0};
    n.temperature = {10.0, 40.0};
    n.horizon = {0.0, 120.0};
    return n;
}

std::vector<double> random_input(std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(dim);
    for (auto& v : x) v = u(rng);
    return x;
}

}  // namespace

static void BM_Branch1Forward(benchmark::State& state) {
    const auto mlp = nn::init_mlp(model::kBranch1Dims, 1);
    const auto x = random_input(3, 2);
    for (auto _ : state) benchmark::DoNotOptimize(nn::predict(mlp, x));
}
BENCHMARK(BM_Branch1Forward);

static void BM_Branch2ForwardBackward(benchmark::State& state) {
    const auto mlp = nn::init_mlp(model::kBranch2Dims, 1);
    const auto x = random_input(4, 3);
    nn::ForwardCache cache;
    for (auto _ : state) {
        nn::forward(mlp, x, cache);
        benchmark::DoNotOptimize(nn::backward(mlp, cache, 1.0));
    }
}
BENCHMARK(BM_Branch2ForwardBackward);

static void BM_AdamStep(benchmark::State& state) {
    auto mlp = nn::init_mlp(model::kBranch2Dims, 1);
    const auto fwd = nn::forward(mlp, random_input(4, 4));
    const auto grads = nn::backward(mlp, fwd.cache, 1.0).grads;
    nn::OptimizerState opt(mlp, {});
    for (auto _ : state) nn::optimizer_step(mlp, grads, opt);
}
BENCHMARK(BM_AdamStep);

static void BM_PhysicsLoss(benchmark::State& state) {
    const auto m = model::build_model(bench_norm(), 3.0, 5);
    const auto conds = physics::sample_conditions(
        7, static_cast<std::size_t>(state.range(0)), physics::SamplingPool::uniform(-6.0, 2.0),
        physics::SamplingPool::uniform(10.0, 40.0), physics::HorizonSet{30.0, 60.0, 90.0}, physics::HorizonMode::All,
        3.0);
    for (auto _ : state) benchmark::DoNotOptimize(physics::physics_loss(m, conds).loss);
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PhysicsLoss)->Arg(32)->Arg(256);

static void BM_CascadedPrediction(benchmark::State& state) {
    const auto m = model::build_model(bench_norm(), 3.0, 5);
    for (auto _ : state) benchmark::DoNotOptimize(model::predict_cascaded(m, 3.7, -1.2, 25.0, -1.1, 25.5, 60.0));
}
BENCHMARK(BM_CascadedPrediction);

BENCHMARK_MAIN();
