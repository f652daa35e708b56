#include "commands.hpp"

#include "socpinn/csv.hpp"
#include "socpinn/data.hpp"
#include "socpinn/errors.hpp"
#include "socpinn/eval.hpp"
#include "socpinn/hash.hpp"
#include "socpinn/model.hpp"
#include "socpinn/nn.hpp"
#include "socpinn/synth.hpp"
#include "socpinn/train.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <regex>
#include <sstream>
#include <thread>

#ifndef SOCPINN_VERSION
#define SOCPINN_VERSION "0.0.0"
#endif

namespace socpinn::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

std::size_t thread_budget() {
    std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("SOC_PINN_THREADS")) {
        const auto v = csv::parse_number(env);
        if (!v || *v < 1.0 || std::floor(*v) != *v) {
            fail(ErrorKind::Config, "SOC_PINN_THREADS must be a positive integer, got '" + std::string(env) + "'");
        }
        return static_cast<std::size_t>(*v);
    }
    return hw;
}

namespace {

/// Run record written next to the outputs of every subcommand.
class Manifest {
public:
    Manifest(std::string subcommand, fs::path out_dir)
        : subcommand_(std::move(subcommand)), out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {}

    Json config = Json::object();
    std::vector<std::uint64_t> seeds;

    void add_input(const fs::path& path) { inputs_.push_back(path); }

    void write() const {
        Json j;
        j["subcommand"] = subcommand_;
        j["tool_version"] = SOCPINN_VERSION;
        j["config"] = config;
        j["seeds"] = seeds;
        auto& in = j["inputs"] = Json::array();
        for (const auto& p : inputs_) {
            for (const auto& f : files_under(p)) in.push_back({{"path", f.string()}, {"sha256", sha256_file(f)}});
        }
        j["output_dir"] = out_dir_.string();
        auto& outputs = j["outputs"] = Json::array();
        for (const auto& f : files_under(out_dir_)) {
            if (f.filename() == "manifest.json") continue;
            outputs.push_back({{"path", fs::relative(f, out_dir_).generic_string()}, {"sha256", sha256_file(f)}});
        }
        j["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        csv::write_file_atomic(out_dir_ / "manifest.json", j.dump(2) + "\n");
    }

private:
    static std::vector<fs::path> files_under(const fs::path& p) {
        std::vector<fs::path> out;
        if (fs::is_regular_file(p)) {
            out.push_back(p);
        } else if (fs::is_directory(p)) {
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file()) out.push_back(e.path());
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    std::string subcommand_;
    fs::path out_dir_;
    std::chrono::steady_clock::time_point start_;
    std::vector<fs::path> inputs_;
};

std::vector<double> parse_list(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto v = csv::parse_number(item);
        if (!v) fail(ErrorKind::Config, std::string("cannot parse ") + what + " entry '" + item + "'");
        out.push_back(*v);
    }
    if (out.empty()) fail(ErrorKind::Config, std::string("empty ") + what + " list");
    return out;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
}

Json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot read " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Parse, path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------- dataset

struct DatasetArgs {
    std::string dir;
    std::string split = "auto";
    double train_c_rate = -1.0;
    std::string held_out;
};

/// Resolves one side of a dataset: <dir>/<side>/ when it exists, otherwise
/// the named split policy over every cycle in <dir>.
std::vector<data::Cycle> load_side(const DatasetArgs& args, bool train_side) {
    const fs::path dir(args.dir);
    if (!fs::is_directory(dir)) fail(ErrorKind::Io, "dataset directory '" + args.dir + "' does not exist");
    const auto sub = dir / (train_side ? "train" : "test");
    if ((args.split == "auto" || args.split == "dirs") && fs::is_directory(sub)) {
        return data::read_canonical_dataset(sub);
    }
    if (args.split == "dirs") fail(ErrorKind::Config, "dataset has no " + sub.string() + " directory");
    auto cycles = data::read_canonical_dataset(dir);
    if (args.split == "auto" || args.split == "none") return cycles;
    data::SplitPolicy policy;
    if (args.split == "sandia") {
        policy.kind = data::SplitPolicy::Kind::SandiaCrate;
        policy.train_discharge_c_rate = args.train_c_rate;
    } else if (args.split == "lg") {
        policy.kind = data::SplitPolicy::Kind::LgMixed;
        policy.held_out_mixed = args.held_out;
    } else {
        fail(ErrorKind::Config, "unknown split '" + args.split + "' (expected auto, dirs, none, sandia or lg)");
    }
    auto split = data::split_dataset(cycles, policy);
    return train_side ? split.train : split.test;
}

void add_dataset_options(CLI::App* app, DatasetArgs& args) {
    app->add_option("--dataset", args.dir, "Canonical dataset directory")->required();
    app->add_option("--split", args.split, "auto | dirs | none | sandia | lg")->capture_default_str();
    app->add_option("--train-c-rate", args.train_c_rate, "Discharge C-rate kept for training by the sandia split")
        ->capture_default_str();
    app->add_option("--held-out", args.held_out, "Mixed cycle held out by the lg split");
}

Json dataset_json(const DatasetArgs& a) {
    return {{"dir", a.dir}, {"split", a.split}, {"train_c_rate", a.train_c_rate}, {"held_out", a.held_out}};
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string spec;
    std::string out;
    std::size_t count = 1;
    std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
    if (a.count == 0) fail(ErrorKind::Config, "--count must be at least 1");
    data::SynthSpec base;
    if (!a.spec.empty()) {
        base = data::synth_spec_from_json(read_json(a.spec));
    } else {
        base.ocv = data::default_ocv_curve();
        base.random_profile = data::RandomProfile{};
        base.noise = {0.002, 0.01, 0.3};
    }
    if (a.seed) base.seed = *a.seed;
    // Generate everything before touching the output directory.
    std::vector<data::Cycle> cycles;
    for (std::size_t i = 0; i < a.count; ++i) {
        auto spec = base;
        spec.seed = train::derive_seed(base.seed, i, 0, 0x5e7d);
        spec.id = base.id + "_" + std::to_string(i);
        cycles.push_back(data::generate_synth_cycle(spec));
    }
    const fs::path dir(a.out);
    ensure_dir(dir);
    for (const auto& c : cycles) data::write_canonical_cycle(c, dir);

    Manifest m("synth", dir);
    m.config = {{"spec", data::synth_spec_to_json(base)}, {"count", a.count}};
    m.seeds = {base.seed};
    if (!a.spec.empty()) m.add_input(a.spec);
    m.write();
    out << "wrote " << cycles.size() << " cycle(s) to " << dir.string() << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
    std::vector<std::string> paths;
    std::string schema = "generic";
    std::string mapping;
    std::string out;
    std::optional<double> c_rated_ah;
    std::optional<double> initial_soc;
    std::optional<double> sampling_period_s;
    std::string chemistry;
};

/// C-rates, ambient temperature and profile from battery-archive style names
/// such as SNL_18650_NMC_25C_0-100_0.5-1C_a, or LG names containing "mixed"
/// or a drive-cycle name.
void meta_from_filename(const fs::path& path, data::CycleMeta& meta) {
    const auto stem = path.stem().string();
    std::smatch m;
    static const std::regex crate(R"(_([0-9.]+)-([0-9.]+)C(_|$))");
    if (std::regex_search(stem, m, crate)) {
        meta.c_rate_charge = std::stod(m[1].str());
        meta.c_rate_discharge = -std::stod(m[2].str());
    }
    static const std::regex temp(R"((^|_)(-?[0-9]+)(C|degC)(_|$))");
    if (std::regex_search(stem, m, temp)) meta.ambient_temp_c = std::stod(m[2].str());
    std::string lower = stem;
    std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
    if (lower.find("mix") != std::string::npos) {
        meta.profile = "mixed";
    } else {
        for (const char* name : {"udds", "hwfet", "la92", "us06"}) {
            if (lower.find(name) != std::string::npos) meta.profile = name;
        }
    }
}

data::CsvSchema schema_for(const IngestArgs& a) {
    switch (data::schema_kind_from_string(a.schema)) {
        case data::SchemaKind::Sandia: return data::CsvSchema::sandia();
        case data::SchemaKind::Lg: return data::CsvSchema::lg();
        case data::SchemaKind::Generic: break;
    }
    if (a.mapping.empty()) {
        // Canonical column names; SoC is read when present and derived otherwise.
        const auto lines = a.paths.empty() ? std::vector<std::string>{} : csv::read_lines(a.paths.front());
        const auto header = lines.empty() ? std::vector<std::string>{} : csv::split_line(lines.front());
        if (std::find(header.begin(), header.end(), "soc") != header.end()) return data::CsvSchema::canonical();
        return data::CsvSchema::generic({"time_s", "voltage_v", "current_a", "temp_c", std::nullopt, std::nullopt});
    }
    const auto j = read_json(a.mapping);
    data::ColumnMapping cols;
    try {
        cols.time_s = j.at("time_s").get<std::string>();
        cols.voltage_v = j.at("voltage_v").get<std::string>();
        cols.current_a = j.at("current_a").get<std::string>();
        cols.temp_c = j.at("temp_c").get<std::string>();
        if (j.contains("soc")) cols.soc = j.at("soc").get<std::string>();
        if (j.contains("capacity_ah")) cols.capacity_ah = j.at("capacity_ah").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, a.mapping + ": " + e.what());
    }
    return data::CsvSchema::generic(cols);
}

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
    if (a.paths.empty()) fail(ErrorKind::Config, "no input files");
    const auto schema = schema_for(a);
    std::optional<double> c_rated = a.c_rated_ah;
    if (!c_rated && schema.kind == data::SchemaKind::Lg) c_rated = 3.0;

    std::vector<data::Cycle> cycles;
    std::vector<std::string> failed;
    for (const auto& p : a.paths) {
        try {
            data::ParseOptions opts;
            opts.meta.chemistry = a.chemistry;
            opts.meta.c_rated_ah = c_rated.value_or(0.0);
            if (a.sampling_period_s) opts.meta.sampling_period_s = *a.sampling_period_s;
            opts.initial_soc = a.initial_soc;
            meta_from_filename(p, opts.meta);
            cycles.push_back(data::parse_cycle_csv(p, schema, opts));
        } catch (const Error& e) {
            err << "error: " << p << ": " << e.what() << "\n";
            failed.push_back(p);
        }
    }

    const fs::path dir(a.out);
    ensure_dir(dir);
    Json summary;
    auto& list = summary["cycles"] = Json::array();
    std::size_t total = 0;
    constexpr double inf = std::numeric_limits<double>::infinity();
    double vmin = inf, vmax = -inf, imin = inf, imax = -inf, tmin = inf, tmax = -inf, smin = inf, smax = -inf;
    for (const auto& c : cycles) {
        data::write_canonical_cycle(c, dir);
        double cs_min = inf, cs_max = -inf;
        for (const auto& s : c.samples) {
            vmin = std::min(vmin, s.voltage_v);
            vmax = std::max(vmax, s.voltage_v);
            imin = std::min(imin, s.current_a);
            imax = std::max(imax, s.current_a);
            tmin = std::min(tmin, s.temp_c);
            tmax = std::max(tmax, s.temp_c);
            cs_min = std::min(cs_min, s.soc);
            cs_max = std::max(cs_max, s.soc);
        }
        smin = std::min(smin, cs_min);
        smax = std::max(smax, cs_max);
        total += c.samples.size();
        list.push_back({{"id", c.id},
                        {"samples", c.samples.size()},
                        {"duration_s", c.samples.back().time_s},
                        {"sampling_period_s", c.meta.sampling_period_s},
                        {"soc_min", cs_min},
                        {"soc_max", cs_max}});
    }
    summary["total_samples"] = total;
    if (!cycles.empty()) {
        summary["ranges"] = {{"voltage_v", {vmin, vmax}},
                             {"current_a", {imin, imax}},
                             {"temp_c", {tmin, tmax}},
                             {"soc", {smin, smax}}};
    }
    summary["failed"] = failed;
    csv::write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");

    Manifest m("ingest", dir);
    m.config = {{"schema", a.schema},
                {"mapping", a.mapping},
                {"c_rated_ah", c_rated ? Json(*c_rated) : Json(nullptr)},
                {"initial_soc", a.initial_soc ? Json(*a.initial_soc) : Json(nullptr)}};
    for (const auto& p : a.paths) m.add_input(p);
    if (!a.mapping.empty()) m.add_input(a.mapping);
    m.write();

    out << "ingested " << cycles.size() << " cycle(s), " << total << " samples";
    if (!failed.empty()) out << "; " << failed.size() << " file(s) failed";
    out << "\n";
    return failed.empty() ? kExitOk : kExitData;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
    DatasetArgs dataset;
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> seeds;
    std::string physics;
    std::string horizons;
    std::optional<double> data_horizon_s;
    std::optional<std::size_t> epochs;
    std::optional<double> physics_weight;
    std::optional<double> moving_average_s;
    std::string label;
    bool joint = false;
    bool no_data_loss = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    auto config = a.config.empty() ? train::TrainConfig{} : train::load_config(a.config);
    if (a.seed) config.seed = *a.seed;
    if (!a.physics.empty()) train::set_physics_mode(config, a.physics);
    if (!a.horizons.empty()) config.physics_horizons = parse_list(a.horizons, "horizon");
    if (a.data_horizon_s) config.data_horizon_s = *a.data_horizon_s;
    if (a.epochs) config.epochs = *a.epochs;
    if (a.physics_weight) config.physics_weight = *a.physics_weight;
    if (a.moving_average_s) config.moving_average_s = *a.moving_average_s;
    if (!a.label.empty()) config.label = a.label;
    if (a.joint) config.joint_training = true;
    if (a.no_data_loss) config.data_loss = false;

    const auto cycles = load_side(a.dataset, true);
    if (cycles.empty()) fail(ErrorKind::Data, "dataset split has no training cycles");
    const fs::path dir(a.out);
    ensure_dir(dir);
    Manifest m("train", dir);
    m.add_input(a.dataset.dir);
    if (!a.config.empty()) m.add_input(a.config);

    const auto resolved = train::resolve_config(config, cycles);
    m.config = {{"dataset", dataset_json(a.dataset)}, {"train", train::config_to_json(resolved)}};
    if (a.seeds) {
        if (*a.seeds == 0) fail(ErrorKind::Config, "--seeds must be at least 1");
        std::vector<std::uint64_t> seeds;
        for (std::size_t k = 0; k < *a.seeds; ++k) seeds.push_back(config.seed + k);
        const auto summary = train::train_seeds(cycles, config, seeds, dir);
        m.seeds = seeds;
        out << "trained " << seeds.size() << " seed(s) of " << resolved.label << " into " << dir.string() << "\n";
        (void)summary;
    } else {
        const auto r = train::train_full(cycles, config, dir);
        m.seeds = {config.seed};
        out << "trained " << r.resolved.label << " (seed " << config.seed << "): " << r.checkpoint.string() << "\n";
    }
    m.write();
    return kExitOk;
}

// ---------------------------------------------------------------- eval

/// Checkpoint files named by a path: the file itself, <dir>/checkpoint.json,
/// or <dir>/seed_*/checkpoint.json.
std::vector<fs::path> expand_checkpoints(const std::string& p) {
    const fs::path path(p);
    if (fs::is_regular_file(path)) return {path};
    if (!fs::is_directory(path)) fail(ErrorKind::Io, "checkpoint '" + p + "' does not exist");
    if (fs::is_regular_file(path / "checkpoint.json")) return {path / "checkpoint.json"};
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(path)) {
        if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0 &&
            fs::is_regular_file(e.path() / "checkpoint.json")) {
            out.push_back(e.path() / "checkpoint.json");
        }
    }
    std::sort(out.begin(), out.end());
    if (out.empty()) fail(ErrorKind::Io, "no checkpoint found under '" + p + "'");
    return out;
}

eval::EvalModel load_eval_model(const fs::path& ckpt, const std::string& label_override) {
    eval::EvalModel m;
    m.model = model::load_checkpoint(ckpt);
    m.checkpoint_sha256 = sha256_file(ckpt);
    m.config = "model";
    const auto resolved = ckpt.parent_path() / "config.resolved.json";
    if (fs::is_regular_file(resolved)) {
        const auto j = read_json(resolved);
        m.config = j.value("label", m.config);
        m.seed = j.value("seed", std::uint64_t{0});
    }
    if (!label_override.empty()) m.config = label_override;
    return m;
}

struct EvalArgs {
    std::vector<std::string> checkpoints;
    std::vector<std::string> labels;
    DatasetArgs dataset;
    std::string horizons;
    std::string modes = "cascaded";
    std::string out;
    bool no_physics_only = false;
    double moving_average_s = 0.0;
    std::string dataset_id;
};

int cmd_eval(const EvalArgs& a, std::ostream& out) {
    if (!a.labels.empty() && a.labels.size() != a.checkpoints.size()) {
        fail(ErrorKind::Config, "--label must be given once per --checkpoint");
    }
    std::vector<eval::EvalModel> models;
    std::vector<fs::path> ckpt_files;
    for (std::size_t i = 0; i < a.checkpoints.size(); ++i) {
        for (const auto& f : expand_checkpoints(a.checkpoints[i])) {
            models.push_back(load_eval_model(f, a.labels.empty() ? std::string{} : a.labels[i]));
            ckpt_files.push_back(f);
        }
    }
    const auto cycles = load_side(a.dataset, false);
    if (cycles.empty()) fail(ErrorKind::Data, "dataset split has no test cycles");
    eval::EvalOptions opts;
    opts.modes.clear();
    std::stringstream ss(a.modes);
    for (std::string m; std::getline(ss, m, ',');) opts.modes.push_back(eval::eval_mode_from_string(m));
    opts.physics_only = !a.no_physics_only;
    opts.moving_average_s = a.moving_average_s;
    opts.threads = thread_budget();
    const physics::HorizonSet horizons(parse_list(a.horizons, "horizon"));
    const auto id = a.dataset_id.empty() ? fs::path(a.dataset.dir).filename().string() : a.dataset_id;
    const auto report = eval::multi_horizon_eval(models, cycles, horizons, id, opts);

    const fs::path dir(a.out);
    eval::emit_report(report, dir);
    Manifest m("eval", dir);
    m.config = {{"dataset", dataset_json(a.dataset)},
                {"horizons", report.horizons},
                {"modes", report.modes},
                {"physics_only", opts.physics_only},
                {"moving_average_s", opts.moving_average_s},
                {"config_hash", report.config_hash}};
    for (const auto& mm : models) m.seeds.push_back(mm.seed);
    for (const auto& f : ckpt_files) m.add_input(f);
    m.add_input(a.dataset.dir);
    m.write();

    for (const auto& r : report.aggregates) {
        out << r.config << " " << r.mode << " h=" << csv::format_number(r.horizon_s)
            << " mae=" << csv::format_number(r.mean) << " std=" << csv::format_number(r.std) << " n=" << r.n_seeds
            << "\n";
    }
    return kExitOk;
}

// ---------------------------------------------------------------- rollout

struct RolloutArgs {
    std::string checkpoint;
    DatasetArgs dataset;
    std::vector<std::string> cycles;
    double horizon_s = 0.0;
    std::string mode = "pinn";
    std::string out;
    bool oracle_init = false;
    double moving_average_s = 0.0;
};

int cmd_rollout(const RolloutArgs& a, std::ostream& out) {
    const auto mode = eval::rollout_mode_from_string(a.mode);
    std::optional<model::TwoBranchModel> mdl;
    fs::path ckpt;
    if (!a.checkpoint.empty()) {
        const auto files = expand_checkpoints(a.checkpoint);
        ckpt = files.front();
        mdl = model::load_checkpoint(ckpt);
    } else if (mode != eval::RolloutMode::PhysicsOnly || !a.oracle_init) {
        fail(ErrorKind::Config, "--checkpoint is required unless --mode physics-only --oracle-init");
    }
    auto cycles = load_side(a.dataset, false);
    if (!a.cycles.empty()) {
        std::vector<data::Cycle> picked;
        for (const auto& id : a.cycles) {
            auto it = std::find_if(cycles.begin(), cycles.end(), [&](const data::Cycle& c) { return c.id == id; });
            if (it == cycles.end()) fail(ErrorKind::Data, "cycle '" + id + "' not found in the dataset");
            picked.push_back(*it);
        }
        cycles = std::move(picked);
    }
    if (cycles.empty()) fail(ErrorKind::Data, "no cycles to roll out");

    const fs::path dir(a.out);
    ensure_dir(dir);
    Json summary;
    summary["mode"] = a.mode;
    summary["horizon_s"] = a.horizon_s;
    auto& list = summary["cycles"] = Json::array();
    double sum = 0.0;
    for (const auto& c : cycles) {
        eval::RolloutOptions opts;
        if (a.oracle_init) opts.initial_soc = c.samples.front().soc;
        opts.moving_average_s = a.moving_average_s;
        const auto r = eval::rollout(mdl ? &*mdl : nullptr, c, a.horizon_s, mode, opts);
        eval::emit_rollout(r, dir);
        list.push_back({{"cycle", r.cycle_id}, {"steps", r.time_s.size()}, {"final_error", r.final_error}});
        sum += r.final_error;
        out << r.cycle_id << " steps=" << r.time_s.size() << " final_error=" << csv::format_number(r.final_error)
            << "\n";
    }
    summary["mean_final_error"] = sum / static_cast<double>(cycles.size());
    csv::write_file_atomic(dir / "rollout.json", summary.dump(2) + "\n");

    Manifest m("rollout", dir);
    m.config = {{"dataset", dataset_json(a.dataset)},
                {"horizon_s", a.horizon_s},
                {"mode", a.mode},
                {"oracle_init", a.oracle_init},
                {"moving_average_s", a.moving_average_s}};
    if (!ckpt.empty()) m.add_input(ckpt);
    m.add_input(a.dataset.dir);
    m.write();
    return kExitOk;
}

// ---------------------------------------------------------------- gradcheck

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::vector<std::string> archs;
    std::size_t trials = 20;
    double eps = 1e-6;
    double tol = 1e-4;
    std::string out;
};

int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out) {
    std::vector<std::vector<std::size_t>> archs;
    if (a.archs.empty()) {
        archs.emplace_back(model::kBranch1Dims.begin(), model::kBranch1Dims.end());
        archs.emplace_back(model::kBranch2Dims.begin(), model::kBranch2Dims.end());
    }
    for (const auto& text : a.archs) {
        std::vector<std::size_t> dims;
        for (double d : parse_list(text, "layer size")) {
            if (d < 1.0 || std::floor(d) != d) fail(ErrorKind::InvalidArchitecture, "layer sizes must be positive integers");
            dims.push_back(static_cast<std::size_t>(d));
        }
        archs.push_back(std::move(dims));
    }
    if (a.trials == 0) fail(ErrorKind::Config, "--trials must be at least 1");

    Json report;
    report["seed"] = a.seed;
    report["eps"] = a.eps;
    report["tolerance"] = a.tol;
    auto& rows = report["architectures"] = Json::array();
    double worst = 0.0;
    for (std::size_t k = 0; k < archs.size(); ++k) {
        double arch_worst = 0.0;
        for (std::size_t t = 0; t < a.trials; ++t) {
            const auto s = train::derive_seed(a.seed, k, t, 0x9c);
            const auto mlp = nn::init_mlp(archs[k], s);
            std::mt19937_64 rng(s ^ 0xa5a5a5a5ULL);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::vector<double> x(archs[k].front());
            for (auto& v : x) v = unit(rng);
            arch_worst = std::max(arch_worst, nn::grad_check(mlp, x, a.eps));
        }
        worst = std::max(worst, arch_worst);
        std::string name;
        for (auto d : archs[k]) name += (name.empty() ? "" : ",") + std::to_string(d);
        rows.push_back({{"arch", name}, {"max_rel_error", arch_worst}, {"pass", arch_worst < a.tol}});
        out << "arch " << name << ": max relative error " << csv::format_number(arch_worst) << "\n";
    }
    const bool pass = worst < a.tol;
    report["max_rel_error"] = worst;
    report["pass"] = pass;
    out << (pass ? "PASS" : "FAIL") << " max relative error " << csv::format_number(worst) << " (tolerance "
        << csv::format_number(a.tol) << ")\n";
    if (!a.out.empty()) {
        const fs::path dir(a.out);
        ensure_dir(dir);
        csv::write_file_atomic(dir / "gradcheck.json", report.dump(2) + "\n");
        Manifest m("gradcheck", dir);
        m.config = {{"archs", a.archs}, {"trials", a.trials}, {"eps", a.eps}, {"tolerance", a.tol}};
        m.seeds = {a.seed};
        m.write();
    }
    return pass ? kExitOk : kExitVerification;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Two-branch physics-informed SoC estimator and predictor", "soc_pinn"};
    app.require_subcommand(1);
    app.set_version_flag("--version", SOCPINN_VERSION);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Generate synthetic cycles from a spec");
    s->add_option("--spec,--config", synth.spec, "SynthSpec JSON (default: random drive profile)");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--count", synth.count, "Number of cycles")->capture_default_str();
    s->add_option("--seed", synth.seed, "Base seed; per-cycle seeds derive from it");

    IngestArgs ingest;
    auto* in = app.add_subcommand("ingest", "Convert CSV exports into the canonical dataset layout");
    in->add_option("paths", ingest.paths, "Input CSV files")->required();
    in->add_option("--schema", ingest.schema, "sandia | lg | generic")->capture_default_str();
    in->add_option("--mapping", ingest.mapping, "Column mapping JSON for the generic schema");
    in->add_option("--out", ingest.out, "Output directory")->required();
    in->add_option("--c-rated", ingest.c_rated_ah, "Rated capacity in Ah");
    in->add_option("--initial-soc", ingest.initial_soc, "SoC anchor at the first sample");
    in->add_option("--period", ingest.sampling_period_s, "Sampling period in s (default: median step)");
    in->add_option("--chemistry", ingest.chemistry, "Chemistry tag stored in the metadata");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train branch 1 then branch 2");
    add_dataset_options(t, tr.dataset);
    t->add_option("--config", tr.config, "Training config JSON");
    t->add_option("--out", tr.out, "Output directory")->required();
    t->add_option("--seed", tr.seed, "Random seed");
    t->add_option("--seeds", tr.seeds, "Train this many consecutive seeds starting at --seed");
    t->add_option("--physics", tr.physics, "off | single:<h> | all");
    t->add_option("--horizons", tr.horizons, "Physics horizons in s, comma separated");
    t->add_option("--data-horizon", tr.data_horizon_s, "Data horizon N in s");
    t->add_option("--epochs", tr.epochs, "Maximum epochs per branch");
    t->add_option("--physics-weight", tr.physics_weight, "Weight of the physics term");
    t->add_option("--moving-average", tr.moving_average_s, "Trailing moving-average window in s");
    t->add_option("--label", tr.label, "Config label carried into reports");
    t->add_flag("--joint", tr.joint, "Debug: joint training without stop-gradient");
    t->add_flag("--no-data-loss", tr.no_data_loss, "Debug: branch 2 on the physics term only");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Per-horizon MAE report");
    e->add_option("--checkpoint", ev.checkpoints, "Checkpoint file or training output directory")->required();
    e->add_option("--label", ev.labels, "Config label per --checkpoint");
    add_dataset_options(e, ev.dataset);
    e->add_option("--horizons", ev.horizons, "Test horizons in s, comma separated")->required();
    e->add_option("--modes", ev.modes, "cascaded, teacher-forced, branch1")->capture_default_str();
    e->add_option("--out", ev.out, "Output directory")->required();
    e->add_flag("--no-physics-only", ev.no_physics_only, "Skip the Physics-Only baseline");
    e->add_option("--moving-average", ev.moving_average_s, "Trailing moving-average window in s");
    e->add_option("--dataset-id", ev.dataset_id, "Dataset name recorded in the report");

    RolloutArgs ro;
    auto* r = app.add_subcommand("rollout", "Autoregressive multi-step prediction");
    r->add_option("--checkpoint", ro.checkpoint, "Checkpoint file or training output directory");
    add_dataset_options(r, ro.dataset);
    r->add_option("--cycle", ro.cycles, "Cycle id (repeatable; default: every test cycle)");
    r->add_option("--horizon", ro.horizon_s, "Step horizon in s")->required();
    r->add_option("--mode", ro.mode, "pinn | no-pinn | physics-only")->capture_default_str();
    r->add_option("--out", ro.out, "Output directory")->required();
    r->add_flag("--oracle-init", ro.oracle_init, "Start from the true SoC instead of branch 1");
    r->add_option("--moving-average", ro.moving_average_s, "Trailing moving-average window in s");

    GradcheckArgs gc;
    auto* g = app.add_subcommand("gradcheck", "Compare backprop with finite differences");
    g->add_option("--seed", gc.seed, "Random seed")->capture_default_str();
    g->add_option("--arch", gc.archs, "Layer sizes, e.g. 3,16,32,16,1 (default: both branches)");
    g->add_option("--trials", gc.trials, "Random (weights, input) pairs per architecture")->capture_default_str();
    g->add_option("--eps", gc.eps, "Finite-difference step")->capture_default_str();
    g->add_option("--tol", gc.tol, "Maximum relative error")->capture_default_str();
    g->add_option("--out", gc.out, "Optional output directory");

    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    try {
        app.parse(rev);
    } catch (const CLI::ParseError& ex) {
        const int code = app.exit(ex, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (s->parsed()) return cmd_synth(synth, out);
        if (in->parsed()) return cmd_ingest(ingest, out, err);
        if (t->parsed()) return cmd_train(tr, out);
        if (e->parsed()) return cmd_eval(ev, out);
        if (r->parsed()) return cmd_rollout(ro, out);
        if (g->parsed()) return cmd_gradcheck(gc, out);
    } catch (const Error& ex) {
        err << "error: " << ex.what() << "\n";
        return exit_code_for(ex.kind());
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace socpinn::cli
