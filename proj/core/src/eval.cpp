#include "socpinn/eval.hpp"

#include "socpinn/csv.hpp"
#include "socpinn/errors.hpp"
#include "socpinn/hash.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

namespace socpinn::eval {

std::string_view to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::Cascaded: return "cascaded";
        case EvalMode::TeacherForced: return "teacher-forced";
        case EvalMode::Branch1Only: return "branch1";
    }
    return "cascaded";
}

EvalMode eval_mode_from_string(std::string_view name) {
    if (name == "cascaded") return EvalMode::Cascaded;
    if (name == "teacher-forced") return EvalMode::TeacherForced;
    if (name == "branch1" || name == "branch1-only") return EvalMode::Branch1Only;
    fail(ErrorKind::Config, "unknown eval mode '" + std::string(name) + "'");
}

double clamp_soc(double soc) { return std::clamp(soc, 0.0, 1.0); }

Predictions predict_examples(const model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                             EvalMode mode) {
    Predictions p;
    p.raw.reserve(examples.size());
    p.target.reserve(examples.size());
    for (const auto& e : examples) {
        switch (mode) {
            case EvalMode::Branch1Only:
                p.raw.push_back(model::estimate_soc_now(model, e.voltage_v, e.current_a, e.temp_c));
                p.target.push_back(e.soc_now);
                break;
            case EvalMode::TeacherForced:
                p.raw.push_back(model::predict_soc_future(model, e.soc_now, e.i_avg_a, e.t_avg_c, e.horizon_s));
                p.target.push_back(e.soc_future);
                break;
            case EvalMode::Cascaded:
                p.raw.push_back(model::predict_cascaded(model, e.voltage_v, e.current_a, e.temp_c, e.i_avg_a,
                                                        e.t_avg_c, e.horizon_s)
                                    .soc_future);
                p.target.push_back(e.soc_future);
                break;
        }
    }
    return p;
}

namespace {

MaePair mae_of(const std::vector<double>& raw, const std::vector<double>& target) {
    if (raw.empty()) fail(ErrorKind::InvalidInput, "MAE of an empty example set");
    double clamped = 0.0, unclamped = 0.0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        clamped += std::abs(clamp_soc(raw[i]) - target[i]);
        unclamped += std::abs(raw[i] - target[i]);
    }
    const double n = static_cast<double>(raw.size());
    return {clamped / n, unclamped / n};
}

}  // namespace

double eval_mae(const model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples, EvalMode mode) {
    if (examples.empty()) fail(ErrorKind::InvalidInput, "MAE of an empty example set");
    const auto p = predict_examples(model, examples, mode);
    return mae_of(p.raw, p.target).mae;
}

double eval_mae_raw(const model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                    EvalMode mode) {
    if (examples.empty()) fail(ErrorKind::InvalidInput, "MAE of an empty example set");
    const auto p = predict_examples(model, examples, mode);
    return mae_of(p.raw, p.target).raw_mae;
}

double physics_only_predict(double soc_now, double i_avg_a, double horizon_s, double c_rated_ah) {
    return physics::coulomb_count(soc_now, i_avg_a, horizon_s, c_rated_ah);
}

MaePair physics_only_mae(const std::vector<data::TrainingExample>& examples, double c_rated_ah) {
    std::vector<double> raw, target;
    raw.reserve(examples.size());
    target.reserve(examples.size());
    for (const auto& e : examples) {
        raw.push_back(physics_only_predict(e.soc_now, e.i_avg_a, e.horizon_s, c_rated_ah));
        target.push_back(e.soc_future);
    }
    return mae_of(raw, target);
}

std::vector<AggregateRow> aggregate(const std::vector<ReportRow>& rows) {
    std::vector<AggregateRow> out;
    std::vector<std::vector<double>> values;
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const AggregateRow& a) {
            return a.config == r.config && a.mode == r.mode && a.horizon_s == r.horizon_s;
        });
        std::size_t k = static_cast<std::size_t>(it - out.begin());
        if (it == out.end()) {
            out.push_back({r.config, r.mode, r.horizon_s, 0.0, 0.0, 0});
            values.emplace_back();
        }
        values[k].push_back(r.mae);
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto& v = values[k];
        const double n = static_cast<double>(v.size());
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= n;
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        out[k].mean = mean;
        out[k].std = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        out[k].n_seeds = v.size();
    }
    return out;
}

EvalReport multi_horizon_eval(const std::vector<EvalModel>& models, const std::vector<data::Cycle>& test_cycles,
                              const physics::HorizonSet& horizons, const std::string& dataset_id,
                              const EvalOptions& options) {
    if (test_cycles.empty()) fail(ErrorKind::Config, "no test cycles");
    if (horizons.empty()) fail(ErrorKind::Config, "no evaluation horizons");
    if (options.modes.empty()) fail(ErrorKind::Config, "no evaluation modes");

    std::vector<data::Cycle> smoothed;
    const std::vector<data::Cycle>* cycles = &test_cycles;
    if (options.moving_average_s > 0.0) {
        for (const auto& c : test_cycles) smoothed.push_back(data::moving_average(c, options.moving_average_s));
        cycles = &smoothed;
    }

    std::vector<std::vector<data::TrainingExample>> per_horizon;
    for (double h : horizons.values()) {
        std::vector<data::TrainingExample> ex;
        for (std::size_t g = 0; g < cycles->size(); ++g) {
            auto part = data::build_examples((*cycles)[g], h, g);
            ex.insert(ex.end(), part.begin(), part.end());
        }
        if (ex.empty()) fail(ErrorKind::Data, "test cycles yield no examples at horizon " + csv::format_number(h) + " s");
        per_horizon.push_back(std::move(ex));
    }

    EvalReport report;
    report.dataset_id = dataset_id;
    report.horizons = horizons.values();
    for (auto m : options.modes) report.modes.emplace_back(to_string(m));

    const std::size_t nh = horizons.size();
    const std::size_t nm = options.modes.size();
    const std::size_t tuples = models.size() * nh * nm;
    report.rows.resize(tuples);
    auto run_tuple = [&](std::size_t t) {
        const std::size_t mi = t / (nh * nm);
        const std::size_t hi = (t / nm) % nh;
        const std::size_t oi = t % nm;
        const auto p = predict_examples(models[mi].model, per_horizon[hi], options.modes[oi]);
        const auto m = mae_of(p.raw, p.target);
        report.rows[t] = {models[mi].config, models[mi].seed, std::string(to_string(options.modes[oi])),
                          horizons.values()[hi], m.mae, m.raw_mae, p.raw.size()};
    };
    const std::size_t workers = std::max<std::size_t>(1, std::min(options.threads, tuples));
    if (workers <= 1) {
        for (std::size_t t = 0; t < tuples; ++t) run_tuple(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::exception_ptr error;
        std::mutex error_mu;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < tuples; t = next++) {
                    try {
                        run_tuple(t);
                    } catch (...) {
                        std::lock_guard lock(error_mu);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    if (options.physics_only) {
        const double c_rated = models.empty() ? test_cycles.front().meta.c_rated_ah : models.front().model.c_rated_ah;
        for (std::size_t hi = 0; hi < nh; ++hi) {
            const auto m = physics_only_mae(per_horizon[hi], c_rated);
            report.rows.push_back({"physics-only", std::nullopt, "physics-only", horizons.values()[hi], m.mae,
                                   m.raw_mae, per_horizon[hi].size()});
        }
    }
    report.aggregates = aggregate(report.rows);

    nlohmann::ordered_json cfg;
    cfg["dataset_id"] = dataset_id;
    cfg["horizons"] = report.horizons;
    cfg["modes"] = report.modes;
    cfg["physics_only"] = options.physics_only;
    cfg["moving_average_s"] = options.moving_average_s;
    std::vector<std::string> cycle_ids;
    for (const auto& c : test_cycles) cycle_ids.push_back(c.id);
    cfg["test_cycles"] = cycle_ids;
    auto& ms = cfg["models"] = nlohmann::ordered_json::array();
    for (const auto& m : models) {
        const auto sha = m.checkpoint_sha256.empty() ? sha256_hex(model::checkpoint_to_string(m.model))
                                                     : m.checkpoint_sha256;
        ms.push_back({{"config", m.config}, {"seed", m.seed}, {"checkpoint_sha256", sha}});
    }
    report.config = cfg;
    report.config_hash = sha256_hex(cfg.dump());
    if (!models.empty()) report.accounting = accounting_json(models.front().model);
    return report;
}

std::string_view to_string(RolloutMode mode) {
    switch (mode) {
        case RolloutMode::Pinn: return "pinn";
        case RolloutMode::NoPinn: return "no-pinn";
        case RolloutMode::PhysicsOnly: return "physics-only";
    }
    return "pinn";
}

RolloutMode rollout_mode_from_string(std::string_view name) {
    if (name == "pinn") return RolloutMode::Pinn;
    if (name == "no-pinn") return RolloutMode::NoPinn;
    if (name == "physics-only") return RolloutMode::PhysicsOnly;
    fail(ErrorKind::Config, "unknown rollout mode '" + std::string(name) + "'");
}

RolloutResult rollout(const model::TwoBranchModel* model, const data::Cycle& input, double horizon_s,
                      RolloutMode mode, const RolloutOptions& options) {
    input.validate();
    const bool physics_only = mode == RolloutMode::PhysicsOnly;
    if (!model && !(physics_only && options.initial_soc)) {
        fail(ErrorKind::Config, "rollout needs a model unless physics-only with an initial SoC");
    }
    const double period = input.meta.sampling_period_s;
    const double ratio = horizon_s / period;
    if (!(horizon_s > 0.0) || ratio < 1.0 - 1e-9 || std::abs(ratio - std::round(ratio)) > 1e-9 * ratio) {
        fail(ErrorKind::Config, "rollout horizon must be a positive multiple of the sampling period");
    }
    const auto k = static_cast<std::size_t>(std::llround(ratio));
    if (input.samples.size() <= k) fail(ErrorKind::Config, "cycle '" + input.id + "' is shorter than the horizon");

    const data::Cycle cycle =
        options.moving_average_s > 0.0 ? data::moving_average(input, options.moving_average_s) : input;
    double c_rated = input.meta.c_rated_ah;
    if (model) c_rated = model->c_rated_ah;
    if (options.c_rated_ah) c_rated = *options.c_rated_ah;

    const auto& s = cycle.samples;
    RolloutResult r;
    r.cycle_id = input.id;
    r.mode = std::string(to_string(mode));
    r.horizon_s = horizon_s;
    double soc = options.initial_soc
                     ? *options.initial_soc
                     : model::estimate_soc_now(*model, s[0].voltage_v, s[0].current_a, s[0].temp_c);
    for (std::size_t j = 0;; j += k) {
        r.time_s.push_back(s[j].time_s);
        r.predicted.push_back(soc);
        r.truth.push_back(input.samples[j].soc);
        r.abs_error.push_back(std::abs(soc - input.samples[j].soc));
        if (j + k >= s.size()) break;
        double isum = 0.0, tsum = 0.0;
        for (std::size_t m = j + 1; m <= j + k; ++m) {
            isum += s[m].current_a;
            tsum += s[m].temp_c;
        }
        const double i_avg = isum / static_cast<double>(k);
        const double t_avg = tsum / static_cast<double>(k);
        soc = physics_only ? physics::coulomb_count(soc, i_avg, horizon_s, c_rated)
                           : model::predict_soc_future(*model, soc, i_avg, t_avg, horizon_s);
    }
    r.final_error = r.abs_error.back();
    return r;
}

nlohmann::ordered_json accounting_json(const model::TwoBranchModel& m) {
    nlohmann::ordered_json j;
    j["branch1_params"] = m.branch1.param_count();
    j["branch2_params"] = m.branch2.param_count();
    j["total_params"] = model::param_count(m);
    j["branch1_macs"] = model::mac_count(m.branch1);
    j["branch2_macs"] = model::mac_count(m.branch2);
    j["total_macs"] = model::mac_count(m.branch1) + model::mac_count(m.branch2);
    j["float32_bytes"] = model::float32_bytes(m);
    return j;
}

}  // namespace socpinn::eval
