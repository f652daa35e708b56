#include "socpinn/csv.hpp"
#include "socpinn/eval.hpp"
#include "socpinn/train.hpp"

#include "bench_data.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace socpinn;
using socpinn::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

eval::EvalReport sample_report() {
    static const auto report = [] {
        const auto ds = socpinn::testing::generalization_dataset(5, 3, 2, 1200.0);
        std::vector<eval::EvalModel> models;
        for (std::uint64_t s = 0; s < 2; ++s) {
            train::TrainConfig c;
            c.epochs = 2;
            c.seed = s;
            c.data_horizon_s = 30.0;
            c.physics_horizons = {30.0, 60.0};
            models.push_back({"pinn-all", s, train::train_full(ds.train, c).model, ""});
        }
        eval::EvalOptions o;
        o.modes = {eval::EvalMode::Cascaded, eval::EvalMode::TeacherForced};
        return eval::multi_horizon_eval(models, ds.test, physics::HorizonSet{30.0, 60.0}, "synthetic", o);
    }();
    return report;
}

}  // namespace

TEST(Report, EmptyReportIsHeaderOnly) {
    TempDir dir("report");
    eval::EvalReport empty;
    eval::emit_report(empty, dir.path());
    EXPECT_EQ(slurp(dir / "report.csv"), "config,seed,mode,horizon_s,mae,raw_mae,n_examples,config_hash\n");
    const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
    EXPECT_TRUE(j["rows"].empty());
    EXPECT_TRUE(j["aggregates"].empty());
    EXPECT_FALSE(std::filesystem::exists(dir / "plots"));
}

TEST(Report, CsvMatchesRows) {
    const auto& r = sample_report();
    const auto csv = eval::report_csv(r);
    EXPECT_EQ(count_lines(csv), r.rows.size() + 1);
    EXPECT_EQ(r.rows.size(), 2u * 2u * 2u + 2u);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    for (const auto& row : r.rows) {
        std::getline(in, line);
        const auto f = csv::split_line(line);
        ASSERT_EQ(f.size(), 8u);
        EXPECT_EQ(f[0], row.config);
        EXPECT_EQ(f[1], row.seed ? std::to_string(*row.seed) : "");
        EXPECT_EQ(f[2], row.mode);
        EXPECT_EQ(*csv::parse_number(f[4]), row.mae);
        EXPECT_EQ(*csv::parse_number(f[5]), row.raw_mae);
        EXPECT_EQ(f[7], r.config_hash);
    }
}

TEST(Report, JsonCarriesRawAndNullSeed) {
    const auto& r = sample_report();
    const auto j = eval::report_json(r);
    ASSERT_EQ(j["rows"].size(), r.rows.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        EXPECT_EQ(j["rows"][i]["raw"]["mae"].get<double>(), r.rows[i].raw_mae);
        EXPECT_EQ(j["rows"][i]["seed"].is_null(), !r.rows[i].seed.has_value());
    }
    EXPECT_EQ(j["config_hash"], r.config_hash);
    EXPECT_EQ(j["accounting"]["total_params"], 2322);
}

TEST(Report, ReemitIsByteIdentical) {
    TempDir a("report_a"), b("report_b");
    eval::emit_report(sample_report(), a.path());
    eval::emit_report(sample_report(), b.path());
    for (const auto* name : {"report.json", "report.csv", "plots/pinn-all__cascaded.dat",
                             "plots/physics-only__physics-only.dat"}) {
        ASSERT_TRUE(std::filesystem::exists(a / name)) << name;
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
    }
}

TEST(Report, PlotSeriesFormat) {
    TempDir dir("report_plots");
    const auto& r = sample_report();
    eval::emit_report(r, dir.path());
    std::size_t files = 0;
    for (const auto& e : std::filesystem::directory_iterator(dir / "plots")) {
        ++files;
        std::ifstream in(e.path());
        std::string line;
        std::size_t data_lines = 0;
        while (std::getline(in, line)) {
            if (line.rfind('#', 0) == 0) continue;
            std::istringstream fields(line);
            double h = 0, mean = 0, sd = 0;
            ASSERT_TRUE(static_cast<bool>(fields >> h >> mean >> sd)) << line;
            EXPECT_GE(mean, 0.0);
            ++data_lines;
        }
        EXPECT_EQ(data_lines, 2u);
    }
    EXPECT_EQ(files, 3u);
}

TEST(Report, RolloutFiles) {
    TempDir dir("report_rollout");
    const auto c = socpinn::testing::constant_current_cycle(-1.5, 600.0, 10.0);
    eval::RolloutOptions o;
    o.initial_soc = 1.0;
    const auto r = eval::rollout(nullptr, c, 60.0, eval::RolloutMode::PhysicsOnly, o);
    eval::emit_rollout(r, dir.path());
    const auto csv = slurp(dir / "rollout_cc.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "step,time_s,predicted_soc,true_soc,abs_error");
    EXPECT_EQ(count_lines(csv), r.time_s.size() + 1);
    EXPECT_TRUE(std::filesystem::exists(dir / "plots" / "rollout_cc.dat"));
}
