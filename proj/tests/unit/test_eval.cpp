#include "socpinn/eval.hpp"
#include "socpinn/train.hpp"

#include "bench_data.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace socpinn;
using socpinn::testing::expect_kind;
using socpinn::testing::unit_norm;

namespace {

/// Branch 2 replaced by a linear map that equals Coulomb counting exactly at
/// one horizon: soc + i * h / (3600 C) with i recovered from its normalized value.
nn::Mlp coulomb_branch(const model::NormStats& norm, double horizon_s, double c_rated_ah) {
    const double k = horizon_s / (3600.0 * c_rated_ah);
    const double span = norm.current.max - norm.current.min;
    return nn::Mlp({nn::DenseLayer{4, 1, {1.0, span * k, 0.0, 0.0}, {norm.current.min * k}, nn::Activation::Identity}});
}

/// Branch 1 replaced by a linear readout that ignores its inputs.
nn::Mlp constant_branch(double value) {
    return nn::Mlp({nn::DenseLayer{3, 1, {0.0, 0.0, 0.0}, {value}, nn::Activation::Identity}});
}

const socpinn::testing::BenchDataset& small_ds() {
    static const auto ds = socpinn::testing::generalization_dataset(21, 4, 2, 1800.0);
    return ds;
}

std::vector<data::TrainingExample> examples_at(const std::vector<data::Cycle>& cycles, double h) {
    std::vector<data::TrainingExample> out;
    for (std::size_t g = 0; g < cycles.size(); ++g) {
        auto part = data::build_examples(cycles[g], h, g);
        out.insert(out.end(), part.begin(), part.end());
    }
    return out;
}

const std::vector<eval::EvalModel>& trained_models() {
    static const auto models = [] {
        std::vector<eval::EvalModel> out;
        for (std::uint64_t s = 0; s < 5; ++s) {
            train::TrainConfig c;
            c.epochs = 8;
            c.seed = s;
            c.data_horizon_s = 30.0;
            c.physics_horizons = {30.0, 60.0, 90.0};
            auto r = train::train_full(small_ds().train, c);
            out.push_back({r.resolved.label, s, r.model, ""});
        }
        return out;
    }();
    return models;
}

}  // namespace

TEST(EvalMode, Strings) {
    EXPECT_EQ(eval::eval_mode_from_string("cascaded"), eval::EvalMode::Cascaded);
    EXPECT_EQ(eval::eval_mode_from_string("teacher-forced"), eval::EvalMode::TeacherForced);
    EXPECT_EQ(eval::eval_mode_from_string("branch1"), eval::EvalMode::Branch1Only);
    EXPECT_EQ(eval::eval_mode_from_string("branch1-only"), eval::EvalMode::Branch1Only);
    expect_kind(ErrorKind::Config, [] { eval::eval_mode_from_string("both"); });
    EXPECT_EQ(eval::rollout_mode_from_string("no-pinn"), eval::RolloutMode::NoPinn);
    expect_kind(ErrorKind::Config, [] { eval::rollout_mode_from_string("pinn-all"); });
}

TEST(EvalMae, PerfectModelScoresZero) {
    const auto c = socpinn::testing::constant_current_cycle(0.0, 600.0, 10.0, 0.7);
    auto m = model::build_model(unit_norm(), 3.0, 1);
    m.branch1 = constant_branch(0.7);
    m.branch2 = coulomb_branch(m.norm, 30.0, 3.0);
    const auto ex = data::build_examples(c, 30.0);
    EXPECT_EQ(eval::eval_mae(m, ex, eval::EvalMode::Branch1Only), 0.0);
    EXPECT_EQ(eval::eval_mae(m, ex, eval::EvalMode::TeacherForced), 0.0);
    EXPECT_EQ(eval::eval_mae(m, ex, eval::EvalMode::Cascaded), 0.0);
}

TEST(EvalMae, CoulombFitBranchOnConstantCurrent) {
    const auto c = socpinn::testing::constant_current_cycle(-2.0, 1800.0, 10.0);
    auto m = model::build_model(unit_norm(), 3.0, 1);
    m.branch2 = coulomb_branch(m.norm, 60.0, 3.0);
    EXPECT_LT(eval::eval_mae(m, data::build_examples(c, 60.0), eval::EvalMode::TeacherForced), 0.02);
}

TEST(EvalMae, ClampOnlyOnReportSide) {
    const auto c = socpinn::testing::constant_current_cycle(0.0, 300.0, 10.0, 0.9);
    auto m = model::build_model(unit_norm(), 3.0, 1);
    m.branch1 = constant_branch(1.3);
    const auto ex = data::build_examples(c, 10.0);
    EXPECT_NEAR(eval::eval_mae(m, ex, eval::EvalMode::Branch1Only), 0.1, 1e-12);
    EXPECT_NEAR(eval::eval_mae_raw(m, ex, eval::EvalMode::Branch1Only), 0.4, 1e-12);
    EXPECT_EQ(eval::clamp_soc(-0.2), 0.0);
    EXPECT_EQ(eval::clamp_soc(0.3), 0.3);
    expect_kind(ErrorKind::InvalidInput, [&] { eval::eval_mae(m, {}, eval::EvalMode::Cascaded); });
}

TEST(EvalMae, CascadedAtLeastTeacherForcedOverSeeds) {
    const auto ex = examples_at(small_ds().test, 60.0);
    double cascaded = 0.0, teacher = 0.0;
    for (const auto& m : trained_models()) {
        cascaded += eval::eval_mae(m.model, ex, eval::EvalMode::Cascaded);
        teacher += eval::eval_mae(m.model, ex, eval::EvalMode::TeacherForced);
    }
    EXPECT_GE(cascaded / 5.0, teacher / 5.0);
}

TEST(PhysicsOnly, ZeroCurrentIsExact) {
    EXPECT_EQ(eval::physics_only_predict(0.42, 0.0, 120.0, 3.0), 0.42);
    const auto c = socpinn::testing::constant_current_cycle(0.0, 600.0, 10.0, 0.42);
    EXPECT_EQ(eval::physics_only_mae(data::build_examples(c, 60.0), 3.0).mae, 0.0);
}

TEST(PhysicsOnly, ConstantCurrentMatchesGroundTruth) {
    const auto c = socpinn::testing::constant_current_cycle(-1.3, 1800.0, 10.0);
    for (const auto& e : data::build_examples(c, 90.0)) {
        EXPECT_NEAR(eval::physics_only_predict(e.soc_now, e.i_avg_a, 90.0, 3.0), e.soc_future, 1e-12);
    }
}

TEST(PhysicsOnly, VaryingCurrentErrorIsMeanApproximationGap) {
    // Ground truth integrates the trapezoid; the prediction uses the sample mean over (t, t+N].
    data::Cycle c = socpinn::testing::constant_current_cycle(0.0, 100.0, 10.0, 0.8);
    for (std::size_t i = 0; i < c.samples.size(); ++i) c.samples[i].current_a = -0.5 * static_cast<double>(i % 4);
    c = data::derive_soc(c, 3.0, 0.8);
    const auto ex = data::build_examples(c, 30.0);
    ASSERT_EQ(ex.size(), c.samples.size() - 3);
    for (std::size_t i = 0; i < ex.size(); ++i) {
        double trap = 0.0;
        for (std::size_t j = i; j < i + 3; ++j) trap += 0.5 * (c.samples[j].current_a + c.samples[j + 1].current_a) * 10.0;
        const double pred = eval::physics_only_predict(ex[i].soc_now, ex[i].i_avg_a, 30.0, 3.0);
        EXPECT_NEAR(std::abs(pred - ex[i].soc_future), std::abs((ex[i].i_avg_a * 30.0 - trap) / 10800.0), 1e-12);
    }
}

TEST(MultiHorizonEval, CardinalityAndOrder) {
    const auto& models = trained_models();
    eval::EvalOptions o;
    o.modes = {eval::EvalMode::Cascaded, eval::EvalMode::Branch1Only};
    const auto r = eval::multi_horizon_eval(models, small_ds().test, physics::HorizonSet{30.0, 60.0, 90.0}, "t", o);
    ASSERT_EQ(r.rows.size(), models.size() * 3 * 2 + 3);
    EXPECT_EQ(r.rows[0].config, models[0].config);
    EXPECT_EQ(r.rows[0].mode, "cascaded");
    EXPECT_EQ(r.rows[1].mode, "branch1");
    EXPECT_EQ(r.rows[2].horizon_s, 60.0);
    EXPECT_EQ(r.rows.back().config, "physics-only");
    EXPECT_FALSE(r.rows.back().seed.has_value());
    EXPECT_EQ(r.aggregates.size(), 3u * 2u + 3u);
    for (const auto& a : r.aggregates) {
        EXPECT_GE(a.n_seeds, 1u);
        EXPECT_GE(a.mean, 0.0);
    }
    EXPECT_EQ(r.config_hash.size(), 64u);
    EXPECT_EQ(r.accounting["total_params"], 2322);
    EXPECT_EQ(r.accounting["float32_bytes"], 9288);
}

TEST(MultiHorizonEval, ReportedMaeMatchesBruteForce) {
    const auto& models = trained_models();
    eval::EvalOptions o;
    o.modes = {eval::EvalMode::Cascaded, eval::EvalMode::TeacherForced, eval::EvalMode::Branch1Only};
    const physics::HorizonSet hs{30.0, 90.0};
    const auto r = eval::multi_horizon_eval(models, small_ds().test, hs, "t", o);
    for (const auto& row : r.rows) {
        const auto ex = examples_at(small_ds().test, row.horizon_s);
        double sum = 0.0;
        for (const auto& e : ex) {
            double pred = 0.0;
            if (row.mode == "physics-only") {
                pred = physics::coulomb_count(e.soc_now, e.i_avg_a, e.horizon_s, 3.0);
            } else {
                const auto& m = models[*row.seed].model;
                if (row.mode == "branch1") {
                    pred = model::estimate_soc_now(m, e.voltage_v, e.current_a, e.temp_c);
                } else {
                    const double s0 = row.mode == "cascaded"
                                          ? model::estimate_soc_now(m, e.voltage_v, e.current_a, e.temp_c)
                                          : e.soc_now;
                    pred = model::predict_soc_future(m, s0, e.i_avg_a, e.t_avg_c, e.horizon_s);
                }
            }
            const double target = row.mode == "branch1" ? e.soc_now : e.soc_future;
            sum += std::abs(std::clamp(pred, 0.0, 1.0) - target);
        }
        EXPECT_NEAR(row.mae, sum / static_cast<double>(ex.size()), 1e-12) << row.config << " " << row.mode;
        EXPECT_EQ(row.n_examples, ex.size());
    }
    // Aggregates: mean and sample std over seed rows.
    for (const auto& a : r.aggregates) {
        std::vector<double> v;
        for (const auto& row : r.rows) {
            if (row.config == a.config && row.mode == a.mode && row.horizon_s == a.horizon_s) v.push_back(row.mae);
        }
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        EXPECT_NEAR(a.mean, mean, 1e-12);
        EXPECT_NEAR(a.std, v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0, 1e-12);
    }
}

TEST(MultiHorizonEval, PhysicsOnlyRowsAreModelFree) {
    const auto& models = trained_models();
    const physics::HorizonSet hs{30.0, 60.0};
    const auto a = eval::multi_horizon_eval({models[0]}, small_ds().test, hs, "t");
    const auto b = eval::multi_horizon_eval({models[3]}, small_ds().test, hs, "t");
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        if (a.rows[i].mode != "physics-only") continue;
        EXPECT_EQ(a.rows[i].mae, b.rows[i].mae);
        EXPECT_EQ(a.rows[i].raw_mae, b.rows[i].raw_mae);
    }
    EXPECT_NE(a.config_hash, b.config_hash);
}

TEST(MultiHorizonEval, ThreadedMatchesSerial) {
    const auto& models = trained_models();
    eval::EvalOptions serial, threaded;
    serial.modes = threaded.modes = {eval::EvalMode::Cascaded, eval::EvalMode::TeacherForced};
    threaded.threads = 4;
    const physics::HorizonSet hs{30.0, 60.0};
    const auto a = eval::multi_horizon_eval(models, small_ds().test, hs, "t", serial);
    const auto b = eval::multi_horizon_eval(models, small_ds().test, hs, "t", threaded);
    EXPECT_EQ(eval::report_json(a).dump(), eval::report_json(b).dump());
}

TEST(MultiHorizonEval, Errors) {
    const auto& models = trained_models();
    expect_kind(ErrorKind::Config, [&] { eval::multi_horizon_eval(models, small_ds().test, {35.0}, "t"); });
    expect_kind(ErrorKind::Config, [&] { eval::multi_horizon_eval(models, {}, {30.0}, "t"); });
}

TEST(Rollout, PhysicsOnlyConstantCurrentMatchesTruth) {
    const auto c = socpinn::testing::constant_current_cycle(-2.4, 3600.0, 10.0);
    eval::RolloutOptions o;
    o.initial_soc = 1.0;
    const auto r = eval::rollout(nullptr, c, 50.0, eval::RolloutMode::PhysicsOnly, o);
    for (std::size_t j = 0; j < r.time_s.size(); ++j) EXPECT_NEAR(r.predicted[j], r.truth[j], 1e-9);
    EXPECT_LT(r.final_error, 1e-9);
}

TEST(Rollout, PhysicsOnlyAdditivity) {
    const auto c = socpinn::testing::constant_current_cycle(-1.1, 3600.0, 10.0);
    eval::RolloutOptions o;
    o.initial_soc = 0.97;
    const auto r = eval::rollout(nullptr, c, 120.0, eval::RolloutMode::PhysicsOnly, o);
    for (std::size_t j = 0; j < r.time_s.size(); ++j) {
        EXPECT_NEAR(r.predicted[j], physics::coulomb_count(0.97, -1.1, 120.0 * static_cast<double>(j), 3.0), 1e-9);
    }
}

TEST(Rollout, OracleInitEqualsPiecewiseMeanIntegration) {
    const auto c = small_ds().test.front();
    eval::RolloutOptions o;
    o.initial_soc = c.samples.front().soc;
    const auto r = eval::rollout(nullptr, c, 60.0, eval::RolloutMode::PhysicsOnly, o);
    double soc = c.samples.front().soc;
    for (std::size_t j = 1; j < r.time_s.size(); ++j) {
        double mean = 0.0;
        for (std::size_t m = (j - 1) * 6 + 1; m <= j * 6; ++m) mean += c.samples[m].current_a;
        soc += mean / 6.0 * 60.0 / (3600.0 * c.meta.c_rated_ah);
        EXPECT_NEAR(r.predicted[j], soc, 1e-12);
    }
}

TEST(Rollout, GridAndStepZero) {
    const auto& m = trained_models().front().model;
    const auto& c = small_ds().test.back();
    const auto r = eval::rollout(&m, c, 50.0, eval::RolloutMode::Pinn);
    const std::size_t steps = (c.samples.size() - 1) / 5 + 1;
    ASSERT_EQ(r.time_s.size(), steps);
    EXPECT_EQ(r.predicted.size(), steps);
    EXPECT_EQ(r.truth.size(), steps);
    EXPECT_EQ(r.abs_error.size(), steps);
    for (std::size_t j = 1; j < steps; ++j) EXPECT_DOUBLE_EQ(r.time_s[j] - r.time_s[j - 1], 50.0);
    const auto& s0 = c.samples.front();
    EXPECT_EQ(r.abs_error[0], std::abs(model::estimate_soc_now(m, s0.voltage_v, s0.current_a, s0.temp_c) - s0.soc));
    EXPECT_EQ(r.final_error, r.abs_error.back());
}

TEST(Rollout, VoltageReadOnlyAtStepZero) {
    const auto& m = trained_models().front().model;
    auto c = small_ds().test.front();
    const auto a = eval::rollout(&m, c, 30.0, eval::RolloutMode::Pinn);
    for (std::size_t i = 1; i < c.samples.size(); ++i) c.samples[i].voltage_v = 0.0;
    const auto b = eval::rollout(&m, c, 30.0, eval::RolloutMode::Pinn);
    EXPECT_EQ(a.predicted, b.predicted);
}

TEST(Rollout, Errors) {
    const auto c = socpinn::testing::constant_current_cycle(-1.0, 100.0, 10.0);
    expect_kind(ErrorKind::Config, [&] { eval::rollout(nullptr, c, 30.0, eval::RolloutMode::PhysicsOnly); });
    eval::RolloutOptions o;
    o.initial_soc = 1.0;
    expect_kind(ErrorKind::Config, [&] { eval::rollout(nullptr, c, 25.0, eval::RolloutMode::PhysicsOnly, o); });
    expect_kind(ErrorKind::Config, [&] { eval::rollout(nullptr, c, 200.0, eval::RolloutMode::PhysicsOnly, o); });
    expect_kind(ErrorKind::Config, [&] { eval::rollout(nullptr, c, 30.0, eval::RolloutMode::Pinn, o); });
}
