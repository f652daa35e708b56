#include "commands.hpp"

#include "socpinn/csv.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using socpinn::testing::TempDir;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult cli(std::vector<std::string> args) {
    args.insert(args.begin(), "soc_pinn");
    std::ostringstream out, err;
    const int code = socpinn::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(slurp(p)); }

std::size_t count_ext(const fs::path& dir, const std::string& ext) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
    return n;
}

/// Train/test dataset of short synthetic drive cycles.
void make_dataset(const fs::path& dir) {
    ASSERT_EQ(cli({"synth", "--out", (dir / "train").string(), "--count", "3", "--seed", "1"}).code, 0);
    ASSERT_EQ(cli({"synth", "--out", (dir / "test").string(), "--count", "2", "--seed", "2"}).code, 0);
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

std::string constant_current_csv(double current_a, int rows) {
    std::string s = "time_s,voltage_v,current_a,temp_c\n";
    for (int i = 0; i < rows; ++i) {
        s += std::to_string(i * 10) + ",3.8," + socpinn::csv::format_number(current_a) + ",25\n";
    }
    return s;
}

class EnvGuard {
public:
    EnvGuard(const char* name, const char* value) : name_(name) {
        if (const char* old = std::getenv(name)) old_ = old;
        ::setenv(name, value, 1);
    }
    ~EnvGuard() {
        if (old_) {
            ::setenv(name_.c_str(), old_->c_str(), 1);
        } else {
            ::unsetenv(name_.c_str());
        }
    }

private:
    std::string name_;
    std::optional<std::string> old_;
};

}  // namespace

TEST(Cli, UsageErrors) {
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"frobnicate"}).code, 2);
    EXPECT_EQ(cli({"synth"}).code, 2);
    EXPECT_EQ(cli({"gradcheck", "--trials", "many"}).code, 2);
    EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, SynthWritesCycleAndMetadata) {
    TempDir dir("cli");
    const auto r = cli({"synth", "--out", dir.path().string(), "--count", "1", "--seed", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_ext(dir.path(), ".csv"), 1u);
    EXPECT_EQ(count_ext(dir.path(), ".json"), 2u);  // metadata and manifest
    const auto m = read_json(dir / "manifest.json");
    EXPECT_EQ(m["subcommand"], "synth");
    EXPECT_EQ(m["seeds"][0], 4);
    EXPECT_FALSE(m["outputs"].empty());
}

TEST(Cli, SynthIsByteIdenticalOnRerun) {
    TempDir a("cli_a"), b("cli_b");
    ASSERT_EQ(cli({"synth", "--out", a.path().string(), "--count", "2", "--seed", "9"}).code, 0);
    ASSERT_EQ(cli({"synth", "--out", b.path().string(), "--count", "2", "--seed", "9"}).code, 0);
    for (const auto& e : fs::directory_iterator(a.path())) {
        if (e.path().filename() == "manifest.json") continue;
        EXPECT_EQ(slurp(e.path()), slurp(b.path() / e.path().filename())) << e.path();
    }
    EXPECT_EQ(read_json(a / "manifest.json")["outputs"], read_json(b / "manifest.json")["outputs"]);
}

TEST(Cli, SynthCountZeroWritesNothing) {
    TempDir dir("cli");
    const auto out = dir / "never";
    const auto r = cli({"synth", "--out", out.string(), "--count", "0"});
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
    EXPECT_FALSE(fs::exists(out));
}

TEST(Cli, IngestSingleFile) {
    TempDir dir("cli");
    write_text(dir / "cell.csv", constant_current_csv(-3.0, 100));
    const auto r = cli({"ingest", (dir / "cell.csv").string(), "--out", (dir / "out").string(), "--c-rated", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = read_json(dir / "out" / "summary.json");
    EXPECT_EQ(s["cycles"].size(), 1u);
    EXPECT_EQ(s["total_samples"], 100);
    EXPECT_TRUE(s["failed"].empty());
    EXPECT_DOUBLE_EQ(s["cycles"][0]["soc_max"].get<double>(), 1.0);
    EXPECT_TRUE(fs::exists(dir / "out" / "cell.csv"));
    EXPECT_TRUE(fs::exists(dir / "out" / "cell.json"));
}

TEST(Cli, IngestPartialFailureIsDataError) {
    TempDir dir("cli");
    write_text(dir / "good.csv", constant_current_csv(-1.0, 20));
    write_text(dir / "bad.csv", "time_s,voltage_v,current_a,temp_c\n0,3.8,-1,25\n10,3.8,-1,25\n5,3.8,-1,25\n");
    const auto r = cli({"ingest", (dir / "good.csv").string(), (dir / "bad.csv").string(), "--out",
                        (dir / "out").string(), "--c-rated", "3"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("bad.csv"), std::string::npos);
    const auto s = read_json(dir / "out" / "summary.json");
    EXPECT_EQ(s["cycles"].size(), 1u);
    EXPECT_EQ(s["failed"].size(), 1u);
}

TEST(Cli, IngestLgCapacityColumn) {
    TempDir dir("cli");
    std::string text = "Prog Time,Voltage,Current,Temperature,Capacity\n";
    for (int i = 0; i < 60; ++i) {
        char clock[32];
        std::snprintf(clock, sizeof clock, "00:%02d:%02d", i / 6, (i % 6) * 10);
        text += std::string(clock) + ",3.9,-3," + "25," + socpinn::csv::format_number(-3.0 * i * 10.0 / 3600.0) + "\n";
    }
    write_text(dir / "LG_25degC_Mixed1.csv", text);
    const auto r = cli({"ingest", (dir / "LG_25degC_Mixed1.csv").string(), "--schema", "lg", "--out",
                        (dir / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = read_json(dir / "out" / "summary.json");
    EXPECT_GE(s["ranges"]["soc"][0].get<double>(), 0.0);
    EXPECT_LE(s["ranges"]["soc"][1].get<double>(), 1.0);
    const auto meta = read_json(dir / "out" / "LG_25degC_Mixed1.json");
    EXPECT_EQ(meta["profile"], "mixed");
}

TEST(Cli, TrainPhysicsModes) {
    TempDir dir("cli");
    make_dataset(dir.path());
    for (const char* mode : {"off", "all"}) {
        const auto out = dir / (std::string("run_") + mode);
        const auto r = cli({"train", "--dataset", dir.path().string(), "--out", out.string(), "--physics", mode,
                            "--epochs", "2", "--horizons", "30,60", "--data-horizon", "30"});
        ASSERT_EQ(r.code, 0) << r.err;
        EXPECT_TRUE(fs::exists(out / "checkpoint.json"));
        EXPECT_TRUE(fs::exists(out / "history.csv"));
        const auto cfg = read_json(out / "config.resolved.json");
        EXPECT_EQ(cfg["label"], std::string(mode) == "off" ? "no-pinn" : "pinn-all");
        EXPECT_EQ(read_json(out / "manifest.json")["subcommand"], "train");
    }
}

TEST(Cli, TrainMissingDataset) {
    TempDir dir("cli");
    const auto r = cli({"train", "--dataset", (dir / "absent").string(), "--out", (dir / "o").string()});
    EXPECT_NE(r.code, 0);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, TrainRejectsUnknownConfigKey) {
    TempDir dir("cli");
    make_dataset(dir.path());
    write_text(dir / "cfg.json", R"({"epochs": 2, "learning_rat": 0.1})");
    const auto r = cli({"train", "--dataset", dir.path().string(), "--out", (dir / "o").string(), "--config",
                        (dir / "cfg.json").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("learning_rat"), std::string::npos);
}

TEST(Cli, EvalReportCardinality) {
    TempDir dir("cli");
    make_dataset(dir.path());
    ASSERT_EQ(cli({"train", "--dataset", dir.path().string(), "--out", (dir / "m").string(), "--epochs", "2",
                   "--horizons", "30,60", "--data-horizon", "30", "--seeds", "2"})
                  .code,
              0);
    auto r = cli({"eval", "--checkpoint", (dir / "m").string(), "--dataset", dir.path().string(), "--horizons",
                  "30,60,90", "--out", (dir / "e1").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto report = read_json(dir / "e1" / "report.json");
    EXPECT_EQ(report["rows"].size(), 2u * 3u + 3u);
    EXPECT_EQ(report["rows"].back()["mode"], "physics-only");

    r = cli({"eval", "--checkpoint", (dir / "m").string(), "--dataset", dir.path().string(), "--horizons", "30",
             "--modes", "branch1,cascaded", "--out", (dir / "e2").string(), "--no-physics-only"});
    ASSERT_EQ(r.code, 0) << r.err;
    report = read_json(dir / "e2" / "report.json");
    ASSERT_EQ(report["rows"].size(), 4u);
    EXPECT_EQ(report["rows"][0]["mode"], "branch1");
    EXPECT_EQ(report["rows"][1]["mode"], "cascaded");
    EXPECT_EQ(report["rows"][0]["config"], "pinn-all");
    EXPECT_TRUE(fs::exists(dir / "e2" / "report.csv"));

    r = cli({"eval", "--checkpoint", (dir / "m").string(), "--dataset", dir.path().string(), "--horizons", "35",
             "--out", (dir / "e3").string()});
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, RolloutPhysicsOnlyConstantCurrent) {
    TempDir dir("cli");
    write_text(dir / "cc.csv", constant_current_csv(-2.0, 361));
    ASSERT_EQ(cli({"ingest", (dir / "cc.csv").string(), "--out", (dir / "ds").string(), "--c-rated", "3"}).code, 0);
    const auto r = cli({"rollout", "--dataset", (dir / "ds").string(), "--horizon", "60", "--mode", "physics-only",
                        "--oracle-init", "--out", (dir / "ro").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LT(read_json(dir / "ro" / "rollout.json")["mean_final_error"].get<double>(), 1e-6);
    EXPECT_TRUE(fs::exists(dir / "ro" / "rollout_cc.csv"));
}

TEST(Cli, RolloutBatch) {
    TempDir dir("cli");
    ASSERT_EQ(cli({"synth", "--out", (dir / "ds" / "test").string(), "--count", "4", "--seed", "3"}).code, 0);
    const auto r = cli({"rollout", "--dataset", (dir / "ds").string(), "--horizon", "60", "--mode", "physics-only",
                        "--oracle-init", "--out", (dir / "ro").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(count_ext(dir / "ro", ".csv"), 4u);
    EXPECT_EQ(read_json(dir / "ro" / "rollout.json")["cycles"].size(), 4u);
    EXPECT_EQ(cli({"rollout", "--dataset", (dir / "ds").string(), "--horizon", "60", "--out",
                   (dir / "ro2").string()})
                  .code,
              2);
}

TEST(Cli, GradcheckDefaultPasses) {
    TempDir dir("cli");
    const auto r = cli({"gradcheck", "--out", dir.path().string()});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
    EXPECT_TRUE(read_json(dir / "gradcheck.json")["pass"].get<bool>());
}

TEST(Cli, GradcheckCustomArchAndFailure) {
    EXPECT_EQ(cli({"gradcheck", "--arch", "2,3,1", "--trials", "5"}).code, 0);
    const auto r = cli({"gradcheck", "--tol", "0"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("FAIL"), std::string::npos);
    EXPECT_EQ(cli({"gradcheck", "--arch", "3,0,1"}).code, 2);
}

TEST(Cli, ThreadBudgetFromEnvironment) {
    {
        EnvGuard g("SOC_PINN_THREADS", "3");
        EXPECT_EQ(socpinn::cli::thread_budget(), 3u);
    }
    {
        EnvGuard g("SOC_PINN_THREADS", "zero");
        socpinn::testing::expect_kind(socpinn::ErrorKind::Config, [] { socpinn::cli::thread_budget(); });
    }
    {
        EnvGuard g("SOC_PINN_THREADS", "0");
        socpinn::testing::expect_kind(socpinn::ErrorKind::Config, [] { socpinn::cli::thread_budget(); });
    }
}
