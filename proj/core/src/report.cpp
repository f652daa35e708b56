#include "socpinn/csv.hpp"
#include "socpinn/errors.hpp"
#include "socpinn/eval.hpp"

#include <map>

namespace socpinn::eval {

namespace {

using Json = nlohmann::ordered_json;

std::string file_safe(std::string_view name) {
    std::string out;
    for (char c : name) {
        const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                        c == '_' || c == '.';
        out += ok ? c : '_';
    }
    return out.empty() ? "_" : out;
}

void make_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string report_csv(const EvalReport& report) {
    std::string out = "config,seed,mode,horizon_s,mae,raw_mae,n_examples,config_hash\n";
    for (const auto& r : report.rows) {
        out += csv_field(r.config) + "," + (r.seed ? std::to_string(*r.seed) : std::string()) + "," + r.mode + "," +
               csv::format_number(r.horizon_s) + "," + csv::format_number(r.mae) + "," +
               csv::format_number(r.raw_mae) + "," + std::to_string(r.n_examples) + "," + report.config_hash + "\n";
    }
    return out;
}

Json report_json(const EvalReport& report) {
    Json j;
    j["dataset_id"] = report.dataset_id;
    j["config_hash"] = report.config_hash;
    j["horizons"] = report.horizons;
    j["modes"] = report.modes;
    j["config"] = report.config.is_null() ? Json::object() : report.config;
    j["accounting"] = report.accounting;
    auto& rows = j["rows"] = Json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"config", r.config},
                        {"seed", r.seed ? Json(*r.seed) : Json(nullptr)},
                        {"mode", r.mode},
                        {"horizon_s", r.horizon_s},
                        {"mae", r.mae},
                        {"raw", {{"mae", r.raw_mae}}},
                        {"n_examples", r.n_examples}});
    }
    auto& agg = j["aggregates"] = Json::array();
    for (const auto& a : report.aggregates) {
        agg.push_back({{"config", a.config},
                       {"mode", a.mode},
                       {"horizon_s", a.horizon_s},
                       {"mean", a.mean},
                       {"std", a.std},
                       {"n_seeds", a.n_seeds}});
    }
    return j;
}

void emit_report(const EvalReport& report, const std::filesystem::path& out_dir) {
    make_dir(out_dir);
    csv::write_file_atomic(out_dir / "report.json", report_json(report).dump(2) + "\n");
    csv::write_file_atomic(out_dir / "report.csv", report_csv(report));

    // One x-y series per (config, mode): horizon against mean MAE.
    std::vector<std::pair<std::string, std::string>> series;
    std::map<std::pair<std::string, std::string>, std::string> body;
    for (const auto& a : report.aggregates) {
        const auto key = std::make_pair(a.config, a.mode);
        if (!body.count(key)) series.push_back(key);
        body[key] += csv::format_number(a.horizon_s) + " " + csv::format_number(a.mean) + " " +
                     csv::format_number(a.std) + "\n";
    }
    if (series.empty()) return;
    const auto plots = out_dir / "plots";
    make_dir(plots);
    for (const auto& key : series) {
        const std::string text = "# series: " + key.first + " (" + key.second + ")\n# config_hash: " +
                                 report.config_hash + "\n# horizon_s mean_mae std_mae\n" + body[key];
        csv::write_file_atomic(plots / (file_safe(key.first) + "__" + file_safe(key.second) + ".dat"), text);
    }
}

std::string rollout_csv(const RolloutResult& r) {
    std::string out = "step,time_s,predicted_soc,true_soc,abs_error\n";
    for (std::size_t i = 0; i < r.time_s.size(); ++i) {
        out += std::to_string(i) + "," + csv::format_number(r.time_s[i]) + "," + csv::format_number(r.predicted[i]) +
               "," + csv::format_number(r.truth[i]) + "," + csv::format_number(r.abs_error[i]) + "\n";
    }
    return out;
}

void emit_rollout(const RolloutResult& r, const std::filesystem::path& out_dir) {
    make_dir(out_dir);
    const auto name = file_safe(r.cycle_id);
    csv::write_file_atomic(out_dir / ("rollout_" + name + ".csv"), rollout_csv(r));
    const auto plots = out_dir / "plots";
    make_dir(plots);
    std::string text = "# series: " + r.mode + " rollout of " + r.cycle_id + ", horizon " +
                       csv::format_number(r.horizon_s) + " s\n# final_error: " + csv::format_number(r.final_error) +
                       "\n# time_s predicted_soc true_soc\n";
    for (std::size_t i = 0; i < r.time_s.size(); ++i) {
        text += csv::format_number(r.time_s[i]) + " " + csv::format_number(r.predicted[i]) + " " +
                csv::format_number(r.truth[i]) + "\n";
    }
    csv::write_file_atomic(plots / ("rollout_" + name + ".dat"), text);
}

}  // namespace socpinn::eval
