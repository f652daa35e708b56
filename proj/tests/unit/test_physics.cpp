#include "socpinn/physics.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <map>
#include <random>

using namespace socpinn;
using physics::coulomb_count;
using physics::HorizonMode;
using physics::HorizonSet;
using physics::SamplingPool;
using socpinn::testing::expect_kind;
using socpinn::testing::unit_norm;

TEST(CoulombCount, ZeroCurrentKeepsSoc) {
    for (double h : {0.0, 30.0, 3600.0}) {
        for (double c : {1.0, 3.0, 50.0}) EXPECT_EQ(coulomb_count(0.5, 0.0, h, c), 0.5);
    }
}

TEST(CoulombCount, OneCForOneHourEmpties) { EXPECT_EQ(coulomb_count(1.0, -3.0, 3600.0, 3.0), 0.0); }

TEST(CoulombCount, HandEvaluated) { EXPECT_NEAR(coulomb_count(0.8, -1.5, 720.0, 3.0), 0.7, 1e-15); }

TEST(CoulombCount, NotClamped) {
    EXPECT_LT(coulomb_count(0.1, -3.0, 3600.0, 3.0), 0.0);
    EXPECT_GT(coulomb_count(0.9, 3.0, 3600.0, 3.0), 1.0);
}

TEST(CoulombCount, Errors) {
    expect_kind(ErrorKind::Config, [] { coulomb_count(0.5, -1.0, 60.0, 0.0); });
    expect_kind(ErrorKind::Config, [] { coulomb_count(0.5, -1.0, 60.0, -2.0); });
    expect_kind(ErrorKind::Domain, [] { coulomb_count(0.5, -1.0, -60.0, 3.0); });
}

TEST(CoulombCount, LinearInCurrentAndHorizon) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> soc(0.0, 1.0), cur(-5.0, 5.0), hor(1.0, 600.0);
    for (int t = 0; t < 500; ++t) {
        const double s = soc(rng), i = cur(rng), h = hor(rng);
        const double d = coulomb_count(s, i, h, 3.0) - s;
        EXPECT_NEAR(coulomb_count(s, 2.0 * i, h, 3.0) - s, 2.0 * d, 1e-12);
        EXPECT_NEAR(coulomb_count(s, i, 3.0 * h, 3.0) - s, 3.0 * d, 1e-12);
    }
}

TEST(CoulombCount, AdditiveOverHorizons) {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> soc(0.0, 1.0), cur(-5.0, 5.0), hor(1.0, 600.0);
    for (int t = 0; t < 500; ++t) {
        const double s = soc(rng), i = cur(rng), h1 = hor(rng), h2 = hor(rng);
        EXPECT_NEAR(coulomb_count(coulomb_count(s, i, h1, 3.0), i, h2, 3.0), coulomb_count(s, i, h1 + h2, 3.0), 1e-12);
    }
}

TEST(CoulombCount, SignConvention) {
    for (double h : {1.0, 120.0}) {
        EXPECT_LT(coulomb_count(0.5, -0.01, h, 3.0), 0.5);
        EXPECT_GT(coulomb_count(0.5, 0.01, h, 3.0), 0.5);
    }
}

TEST(HorizonSet, Validation) {
    const HorizonSet h{120.0, 240.0, 360.0};
    EXPECT_EQ(h.size(), 3u);
    EXPECT_EQ(h.max(), 360.0);
    EXPECT_TRUE(h.contains(240.0));
    EXPECT_FALSE(h.contains(300.0));
    expect_kind(ErrorKind::Config, [] { HorizonSet(std::vector<double>{}); });
    expect_kind(ErrorKind::Config, [] { HorizonSet{30.0, -1.0}; });
    expect_kind(ErrorKind::Config, [] { HorizonSet{30.0, 30.0}; });
}

TEST(SampleConditions, SingleHorizon) {
    const auto pool = SamplingPool::discrete({-1.0, -2.0, 0.5});
    const auto temps = SamplingPool::uniform(20.0, 30.0);
    const auto c = physics::sample_conditions(1, 500, pool, temps, HorizonSet{120.0}, HorizonMode::Single, 3.0);
    ASSERT_EQ(c.size(), 500u);
    for (const auto& x : c) {
        EXPECT_EQ(x.horizon_s, 120.0);
        EXPECT_GE(x.soc0, 0.0);
        EXPECT_LE(x.soc0, 1.0);
        EXPECT_TRUE(x.i_avg_a == -1.0 || x.i_avg_a == -2.0 || x.i_avg_a == 0.5);
        EXPECT_GE(x.temp_c, 20.0);
        EXPECT_LE(x.temp_c, 30.0);
        const double target = coulomb_count(x.soc0, x.i_avg_a, x.horizon_s, 3.0);
        EXPECT_GE(target, physics::kTargetLow);
        EXPECT_LE(target, physics::kTargetHigh);
    }
}

TEST(SampleConditions, AllHorizonsEvenMix) {
    const auto pool = SamplingPool::discrete({-1.0});
    const auto temps = SamplingPool::discrete({25.0});
    const auto c =
        physics::sample_conditions(9, 3000, pool, temps, HorizonSet{120.0, 240.0, 360.0}, HorizonMode::All, 3.0);
    std::map<double, int> counts;
    for (const auto& x : c) counts[x.horizon_s]++;
    ASSERT_EQ(counts.size(), 3u);
    for (const auto& [h, n] : counts) EXPECT_NEAR(n / 3000.0, 1.0 / 3.0, 0.03) << h;
}

TEST(SampleConditions, SoCIsRoughlyUniform) {
    const auto c = physics::sample_conditions(2, 4000, SamplingPool::discrete({0.0}), SamplingPool::discrete({25.0}),
                                              HorizonSet{60.0}, HorizonMode::Single, 3.0);
    std::array<int, 4> bins{};
    for (const auto& x : c) bins[std::min(3, static_cast<int>(x.soc0 * 4))]++;
    for (int b : bins) EXPECT_NEAR(b / 4000.0, 0.25, 0.03);
}

TEST(SampleConditions, DeterministicPerSeed) {
    const auto pool = SamplingPool::uniform(-6.0, 2.0);
    const auto temps = SamplingPool::uniform(10.0, 40.0);
    const HorizonSet h{30.0, 60.0, 90.0};
    const auto a = physics::sample_conditions(5, 64, pool, temps, h, HorizonMode::All, 3.0);
    const auto b = physics::sample_conditions(5, 64, pool, temps, h, HorizonMode::All, 3.0);
    const auto c = physics::sample_conditions(6, 64, pool, temps, h, HorizonMode::All, 3.0);
    auto same = [](const auto& x, const auto& y) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i].soc0 != y[i].soc0 || x[i].i_avg_a != y[i].i_avg_a || x[i].temp_c != y[i].temp_c ||
                x[i].horizon_s != y[i].horizon_s) {
                return false;
            }
        }
        return true;
    };
    EXPECT_TRUE(same(a, b));
    EXPECT_FALSE(same(a, c));
}

TEST(SampleConditions, OutOfRangeTargetsAreRedrawn) {
    // 1C over 1800 s moves SoC by 0.5, so soc0 must land in [0.45, 1].
    const auto c = physics::sample_conditions(3, 1000, SamplingPool::discrete({-3.0}), SamplingPool::discrete({25.0}),
                                              HorizonSet{1800.0}, HorizonMode::Single, 3.0);
    for (const auto& x : c) EXPECT_GE(x.soc0, 0.45);
}

TEST(SampleConditions, Errors) {
    const auto ok = SamplingPool::discrete({1.0});
    const HorizonSet h{30.0};
    expect_kind(ErrorKind::Config,
                [&] { physics::sample_conditions(1, 10, SamplingPool::discrete({}), ok, h, HorizonMode::All, 3.0); });
    expect_kind(ErrorKind::Config,
                [&] { physics::sample_conditions(1, 10, ok, SamplingPool::discrete({}), h, HorizonMode::All, 3.0); });
    expect_kind(ErrorKind::Config, [&] { physics::sample_conditions(1, 0, ok, ok, h, HorizonMode::All, 3.0); });
    expect_kind(ErrorKind::Config,
                [&] { physics::sample_conditions(1, 10, ok, ok, HorizonSet{30.0, 60.0}, HorizonMode::Single, 3.0); });
}

TEST(PhysicsLoss, MatchesHandComputedMean) {
    const auto m = model::build_model(unit_norm(), 3.0, 12);
    const auto conds = physics::sample_conditions(4, 32, SamplingPool::uniform(-3.0, 1.0),
                                                  SamplingPool::uniform(20.0, 30.0), HorizonSet{120.0, 240.0},
                                                  HorizonMode::All, 3.0);
    const auto r = physics::physics_loss(m, conds);
    double sum = 0.0;
    for (std::size_t k = 0; k < conds.size(); ++k) {
        const auto& c = conds[k];
        const double pred = model::predict_soc_future(m, c.soc0, c.i_avg_a, c.temp_c, c.horizon_s);
        const double target = coulomb_count(c.soc0, c.i_avg_a, c.horizon_s, 3.0);
        EXPECT_DOUBLE_EQ(r.residuals[k], pred - target);
        sum += std::abs(pred - target);
    }
    EXPECT_NEAR(r.loss, sum / static_cast<double>(conds.size()), 1e-15);
    EXPECT_GE(r.loss, 0.0);
    EXPECT_TRUE(r.branch2_grads.congruent_with(m.branch2));
}

TEST(PhysicsLoss, ExactFitContributesNothing) {
    // Branch 2 reduced to the identity on SoC, exact for a zero-current condition.
    auto m = model::build_model(unit_norm(), 3.0, 12);
    physics::PhysicsCondition c{0.6, 0.0, 25.0, 120.0};
    m.branch2 = nn::Mlp({nn::DenseLayer{4, 1, {1.0, 0.0, 0.0, 0.0}, {0.0}, nn::Activation::Identity}});
    const auto r = physics::physics_loss(m, {c});
    EXPECT_EQ(r.loss, 0.0);
    EXPECT_EQ(r.residuals[0], 0.0);
    for (double g : r.branch2_grads.flat()) EXPECT_EQ(g, 0.0);
}

TEST(PhysicsLoss, NeverEvaluatesBranch1) {
    const auto m = model::build_model(unit_norm(), 3.0, 12);
    const auto conds = physics::sample_conditions(4, 16, SamplingPool::uniform(-3.0, 1.0),
                                                  SamplingPool::uniform(20.0, 30.0), HorizonSet{120.0},
                                                  HorizonMode::Single, 3.0);
    const auto before = model::forward_counters().branch1_forward_calls.load();
    physics::physics_loss(m, conds);
    EXPECT_EQ(model::forward_counters().branch1_forward_calls.load(), before);
}

TEST(PhysicsLoss, OptimizerStepLeavesBranch1BitIdentical) {
    auto m = model::build_model(unit_norm(), 3.0, 12);
    const auto params = m.branch1.flat_parameters();
    nn::OptimizerState st(m.branch2, {});
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto conds = physics::sample_conditions(s, 16, SamplingPool::uniform(-3.0, 1.0),
                                                      SamplingPool::uniform(20.0, 30.0), HorizonSet{120.0},
                                                      HorizonMode::Single, 3.0);
        nn::optimizer_step(m.branch2, physics::physics_loss(m, conds).branch2_grads, st);
    }
    EXPECT_EQ(m.branch1.flat_parameters(), params);
}

TEST(PhysicsLoss, EmptyBatchRejected) {
    const auto m = model::build_model(unit_norm(), 3.0, 12);
    expect_kind(ErrorKind::InvalidInput, [&] { physics::physics_loss(m, {}); });
}
