#include "socpinn/train.hpp"

#include "socpinn/csv.hpp"
#include "socpinn/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace socpinn::train {

namespace {

constexpr std::uint64_t kTagShuffle1 = 1;
constexpr std::uint64_t kTagShuffle2 = 2;
constexpr std::uint64_t kTagPhysics = 3;
constexpr std::uint64_t kTagValidation = 4;
constexpr std::uint64_t kTagSplit = 5;
constexpr std::uint64_t kTagJoint = 6;
constexpr std::size_t kValidationConditions = 512;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
}

physics::SamplingPool make_pool(const PoolSpec& spec, std::vector<double> observed, const char* what) {
    switch (spec.kind) {
        case PoolSpec::Kind::Empirical:
            if (observed.empty()) fail(ErrorKind::Config, std::string(what) + " pool is empty");
            return physics::SamplingPool::discrete(std::move(observed));
        case PoolSpec::Kind::ObservedRange: {
            if (observed.empty()) fail(ErrorKind::Config, std::string(what) + " pool is empty");
            const auto [lo, hi] = std::minmax_element(observed.begin(), observed.end());
            return physics::SamplingPool::uniform(*lo, *hi);
        }
        case PoolSpec::Kind::List:
            if (spec.values.empty()) fail(ErrorKind::Config, std::string(what) + " pool list is empty");
            return physics::SamplingPool::discrete(spec.values);
        case PoolSpec::Kind::Uniform:
            return physics::SamplingPool::uniform(spec.lo, spec.hi);
    }
    fail(ErrorKind::Config, "unknown pool kind");
}

struct PhysicsSetup {
    bool enabled = false;
    physics::SamplingPool current;
    physics::SamplingPool temperature;
    physics::HorizonSet horizons;
    physics::HorizonMode mode = physics::HorizonMode::All;
};

PhysicsSetup physics_setup(const TrainConfig& config, const std::vector<data::TrainingExample>& examples) {
    PhysicsSetup s;
    if (config.physics_mode == PhysicsMode::Off) return s;
    s.enabled = true;
    std::vector<double> currents, temps;
    currents.reserve(examples.size());
    temps.reserve(examples.size());
    for (const auto& e : examples) {
        currents.push_back(e.i_avg_a);
        temps.push_back(e.t_avg_c);
    }
    s.current = make_pool(config.current_pool, std::move(currents), "current");
    s.temperature = make_pool(config.temp_pool, std::move(temps), "temperature");
    if (config.physics_mode == PhysicsMode::Single) {
        if (!(config.single_horizon_s > 0.0)) fail(ErrorKind::Config, "single physics mode needs a positive horizon");
        s.horizons = physics::HorizonSet{config.single_horizon_s};
        s.mode = physics::HorizonMode::Single;
    } else {
        if (config.physics_horizons.empty()) fail(ErrorKind::Config, "physics horizons are empty");
        s.horizons = physics::HorizonSet(config.physics_horizons);
        s.mode = physics::HorizonMode::All;
    }
    return s;
}

double c_rated_of(const model::TwoBranchModel& model) {
    if (!(model.c_rated_ah > 0.0)) fail(ErrorKind::Config, "model has no rated capacity");
    return model.c_rated_ah;
}

/// Tracks the best validation loss and keeps a copy of the matching weights.
class EarlyStopper {
public:
    EarlyStopper(const nn::Mlp& mlp, std::size_t patience) : best_params_(mlp.flat_parameters()), patience_(patience) {}

    /// Returns true when training should stop.
    bool update(const nn::Mlp& mlp, double loss, std::size_t epoch) {
        if (loss < best_) {
            best_ = loss;
            best_epoch_ = epoch;
            best_params_ = mlp.flat_parameters();
            stale_ = 0;
            return false;
        }
        ++stale_;
        return patience_ > 0 && stale_ >= patience_;
    }

    void restore(nn::Mlp& mlp) const {
        if (std::isfinite(best_)) mlp.assign_parameters(best_params_);
    }

    [[nodiscard]] std::size_t best_epoch() const { return best_epoch_; }

private:
    std::vector<double> best_params_;
    std::size_t patience_;
    double best_ = std::numeric_limits<double>::infinity();
    std::size_t best_epoch_ = 0;
    std::size_t stale_ = 0;
};

double branch1_mae(const model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples) {
    double sum = 0.0;
    for (const auto& e : examples) {
        const auto x = model::branch1_input(model.norm, e.voltage_v, e.current_a, e.temp_c);
        sum += std::abs(model::run_branch1(model, x) - e.soc_now);
    }
    return sum / static_cast<double>(examples.size());
}

double branch2_data_mae(const model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples) {
    double sum = 0.0;
    for (const auto& e : examples) {
        const auto x = model::branch2_input(model.norm, e.soc_now, e.i_avg_a, e.t_avg_c, e.horizon_s);
        sum += std::abs(model::run_branch2(model, x) - e.soc_future);
    }
    return sum / static_cast<double>(examples.size());
}

void require_examples(const std::vector<data::TrainingExample>& examples) {
    if (examples.empty()) fail(ErrorKind::Config, "no training examples");
}

bool steps_exhausted(const TrainHooks& hooks, std::size_t steps) {
    return hooks.max_steps && steps >= *hooks.max_steps;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffULL); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b), lo(tag), hi(tag)};
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::vector<data::TrainingExample> prepare_examples(const std::vector<data::Cycle>& cycles, double horizon_s,
                                                    double moving_average_s) {
    std::vector<data::TrainingExample> out;
    for (std::size_t g = 0; g < cycles.size(); ++g) {
        std::vector<data::TrainingExample> ex;
        if (moving_average_s > 0.0) {
            ex = data::build_examples(data::moving_average(cycles[g], moving_average_s), horizon_s, g);
        } else {
            ex = data::build_examples(cycles[g], horizon_s, g);
        }
        out.insert(out.end(), ex.begin(), ex.end());
    }
    return out;
}

ValidationSplit split_validation(const std::vector<data::TrainingExample>& examples, double fraction,
                                 std::uint64_t seed) {
    if (fraction < 0.0 || fraction >= 1.0) fail(ErrorKind::Config, "validation fraction must lie in [0, 1)");
    std::size_t groups = 0;
    for (const auto& e : examples) groups = std::max(groups, e.group + 1);
    std::vector<std::vector<std::size_t>> by_group(groups);
    for (std::size_t i = 0; i < examples.size(); ++i) by_group[examples[i].group].push_back(i);

    std::vector<bool> held(examples.size(), false);
    for (std::size_t g = 0; g < groups; ++g) {
        auto& idx = by_group[g];
        const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(idx.size())));
        std::mt19937_64 rng(derive_seed(seed, g, 0, kTagSplit));
        std::shuffle(idx.begin(), idx.end(), rng);
        for (std::size_t k = 0; k < take; ++k) held[idx[k]] = true;
    }
    ValidationSplit split;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        (held[i] ? split.validation : split.train).push_back(examples[i]);
    }
    return split;
}

TrainHistory train_branch1(model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                           const TrainConfig& config, const TrainHooks& hooks) {
    require_examples(examples);
    if (config.batch_size == 0) fail(ErrorKind::Config, "batch_size must be >= 1");
    const auto split = split_validation(examples, config.validation_fraction, config.seed);
    const auto& train = split.train.empty() ? examples : split.train;
    const auto& val = split.validation;

    TrainHistory history;
    nn::OptimizerState opt(model.branch1, config.optimizer);
    EarlyStopper stopper(model.branch1, config.patience);
    auto grads = nn::Gradients::zeros_like(model.branch1);
    nn::ForwardCache cache;
    const auto start = Clock::now();

    for (std::size_t epoch = 0; epoch < config.epochs && !steps_exhausted(hooks, history.steps); ++epoch) {
        const auto order = shuffled_indices(train.size(), derive_seed(config.seed, epoch, 0, kTagShuffle1));
        double epoch_sum = 0.0;
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
            if (steps_exhausted(hooks, history.steps)) break;
            const std::size_t end = std::min(order.size(), b + config.batch_size);
            const double n = static_cast<double>(end - b);
            grads.set_zero();
            for (std::size_t k = b; k < end; ++k) {
                const auto& e = train[order[k]];
                const auto x = model::branch1_input(model.norm, e.voltage_v, e.current_a, e.temp_c);
                const double r = model::run_branch1(model, x, &cache) - e.soc_now;
                epoch_sum += std::abs(r);
                const double dy = r > 0.0 ? 1.0 / n : (r < 0.0 ? -1.0 / n : 0.0);
                if (dy != 0.0) nn::backward_accumulate(model.branch1, cache, dy, grads);
            }
            nn::optimizer_step(model.branch1, grads, opt);
            ++history.steps;
            if (hooks.on_step) hooks.on_step(history.steps, model);
        }
        EpochRecord rec;
        rec.phase = "branch1";
        rec.epoch = epoch;
        rec.branch1_train_mae = epoch_sum / static_cast<double>(train.size());
        rec.branch1_val_mae = val.empty() ? rec.branch1_train_mae : branch1_mae(model, val);
        rec.wall_time_s = seconds_since(start);
        history.epochs.push_back(rec);
        if (stopper.update(model.branch1, rec.branch1_val_mae, epoch)) {
            history.early_stopped = true;
            break;
        }
    }
    if (!history.epochs.empty()) stopper.restore(model.branch1);
    history.best_epoch = stopper.best_epoch();
    return history;
}

TrainHistory train_branch2(model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                           const TrainConfig& config, const TrainHooks& hooks) {
    require_examples(examples);
    if (config.batch_size == 0) fail(ErrorKind::Config, "batch_size must be >= 1");
    model.norm.validate();
    const double c_rated = c_rated_of(model);
    const auto phys = physics_setup(config, examples);
    if (!config.data_loss && !phys.enabled) fail(ErrorKind::Config, "branch 2 has neither a data nor a physics term");
    const bool use_physics = phys.enabled && config.physics_weight != 0.0;

    const auto split = split_validation(examples, config.validation_fraction, config.seed);
    const auto& train = split.train.empty() ? examples : split.train;
    const auto& val = split.validation;
    std::vector<physics::PhysicsCondition> val_conditions;
    if (!config.data_loss) {
        val_conditions = physics::sample_conditions(derive_seed(config.seed, 0, 0, kTagValidation),
                                                    kValidationConditions, phys.current, phys.temperature,
                                                    phys.horizons, phys.mode, c_rated);
    }

    TrainHistory history;
    nn::OptimizerState opt(model.branch2, config.optimizer);
    EarlyStopper stopper(model.branch2, config.patience);
    auto grads = nn::Gradients::zeros_like(model.branch2);
    nn::ForwardCache cache;
    const auto start = Clock::now();

    for (std::size_t epoch = 0; epoch < config.epochs && !steps_exhausted(hooks, history.steps); ++epoch) {
        const auto order = shuffled_indices(train.size(), derive_seed(config.seed, epoch, 0, kTagShuffle2));
        double data_sum = 0.0;
        double phys_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0, batch = 0; b < order.size(); b += config.batch_size, ++batch) {
            if (steps_exhausted(hooks, history.steps)) break;
            const std::size_t end = std::min(order.size(), b + config.batch_size);
            const double n = static_cast<double>(end - b);
            grads.set_zero();
            if (config.data_loss) {
                for (std::size_t k = b; k < end; ++k) {
                    const auto& e = train[order[k]];
                    const auto x = model::branch2_input(model.norm, e.soc_now, e.i_avg_a, e.t_avg_c, e.horizon_s);
                    const double r = model::run_branch2(model, x, &cache) - e.soc_future;
                    data_sum += std::abs(r);
                    const double dy = r > 0.0 ? 1.0 / n : (r < 0.0 ? -1.0 / n : 0.0);
                    if (dy != 0.0) nn::backward_accumulate(model.branch2, cache, dy, grads);
                }
            }
            if (use_physics) {
                const auto conds =
                    physics::sample_conditions(derive_seed(config.seed, epoch, batch, kTagPhysics), end - b,
                                               phys.current, phys.temperature, phys.horizons, phys.mode, c_rated);
                if (hooks.on_physics_batch) hooks.on_physics_batch(history.steps, conds);
                const auto pl = physics::physics_loss(model, conds);
                phys_sum += pl.loss;
                grads.add_scaled(pl.branch2_grads, config.physics_weight);
            }
            nn::optimizer_step(model.branch2, grads, opt);
            ++history.steps;
            ++batches;
            if (hooks.on_step) hooks.on_step(history.steps, model);
        }
        EpochRecord rec;
        rec.phase = "branch2";
        rec.epoch = epoch;
        rec.branch2_data_loss = config.data_loss ? data_sum / static_cast<double>(train.size()) : 0.0;
        rec.branch2_physics_loss = batches > 0 ? phys_sum / static_cast<double>(batches) : 0.0;
        // Early stopping follows the validation data MAE; the physics term only
        // decides when there is no data term.
        double val_loss = 0.0;
        if (config.data_loss) {
            val_loss = val.empty() ? rec.branch2_data_loss : branch2_data_mae(model, val);
        } else {
            val_loss = physics::physics_loss(model, val_conditions).loss;
        }
        rec.branch2_val_loss = val_loss;
        rec.wall_time_s = seconds_since(start);
        history.epochs.push_back(rec);
        if (stopper.update(model.branch2, val_loss, epoch)) {
            history.early_stopped = true;
            break;
        }
    }
    if (!history.epochs.empty()) stopper.restore(model.branch2);
    history.best_epoch = stopper.best_epoch();
    return history;
}

TrainHistory train_joint(model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                         const TrainConfig& config, const TrainHooks& hooks) {
    require_examples(examples);
    if (config.batch_size == 0) fail(ErrorKind::Config, "batch_size must be >= 1");
    model.norm.validate();
    const double c_rated = c_rated_of(model);
    const auto phys = physics_setup(config, examples);
    const bool use_physics = phys.enabled && config.physics_weight != 0.0;

    TrainHistory history;
    nn::OptimizerState opt1(model.branch1, config.optimizer);
    nn::OptimizerState opt2(model.branch2, config.optimizer);
    auto g1 = nn::Gradients::zeros_like(model.branch1);
    auto g2 = nn::Gradients::zeros_like(model.branch2);
    nn::ForwardCache c1, c2;
    std::vector<double> dx;
    const auto start = Clock::now();

    for (std::size_t epoch = 0; epoch < config.epochs && !steps_exhausted(hooks, history.steps); ++epoch) {
        const auto order = shuffled_indices(examples.size(), derive_seed(config.seed, epoch, 0, kTagJoint));
        double b1_sum = 0.0, data_sum = 0.0, phys_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t b = 0, batch = 0; b < order.size(); b += config.batch_size, ++batch) {
            if (steps_exhausted(hooks, history.steps)) break;
            const std::size_t end = std::min(order.size(), b + config.batch_size);
            const double n = static_cast<double>(end - b);
            g1.set_zero();
            g2.set_zero();
            for (std::size_t k = b; k < end; ++k) {
                const auto& e = examples[order[k]];
                const auto x1 = model::branch1_input(model.norm, e.voltage_v, e.current_a, e.temp_c);
                const double soc_hat = model::run_branch1(model, x1, &c1);
                const double r1 = soc_hat - e.soc_now;
                b1_sum += std::abs(r1);
                double d_soc = r1 > 0.0 ? 1.0 / n : (r1 < 0.0 ? -1.0 / n : 0.0);
                if (config.data_loss) {
                    const auto x2 = model::branch2_input(model.norm, soc_hat, e.i_avg_a, e.t_avg_c, e.horizon_s);
                    const double r2 = model::run_branch2(model, x2, &c2) - e.soc_future;
                    data_sum += std::abs(r2);
                    const double dy2 = r2 > 0.0 ? 1.0 / n : (r2 < 0.0 ? -1.0 / n : 0.0);
                    if (dy2 != 0.0) {
                        nn::backward_accumulate(model.branch2, c2, dy2, g2, &dx);
                        d_soc += dx[0];
                    }
                }
                if (d_soc != 0.0) nn::backward_accumulate(model.branch1, c1, d_soc, g1);
            }
            if (use_physics) {
                const auto conds =
                    physics::sample_conditions(derive_seed(config.seed, epoch, batch, kTagPhysics), end - b,
                                               phys.current, phys.temperature, phys.horizons, phys.mode, c_rated);
                if (hooks.on_physics_batch) hooks.on_physics_batch(history.steps, conds);
                const auto pl = physics::physics_loss(model, conds);
                phys_sum += pl.loss;
                g2.add_scaled(pl.branch2_grads, config.physics_weight);
            }
            nn::optimizer_step(model.branch1, g1, opt1);
            nn::optimizer_step(model.branch2, g2, opt2);
            ++history.steps;
            ++batches;
            if (hooks.on_step) hooks.on_step(history.steps, model);
        }
        EpochRecord rec;
        rec.phase = "joint";
        rec.epoch = epoch;
        rec.branch1_train_mae = b1_sum / static_cast<double>(examples.size());
        rec.branch2_data_loss = data_sum / static_cast<double>(examples.size());
        rec.branch2_physics_loss = batches > 0 ? phys_sum / static_cast<double>(batches) : 0.0;
        rec.wall_time_s = seconds_since(start);
        history.epochs.push_back(rec);
    }
    history.best_epoch = history.epochs.empty() ? 0 : history.epochs.size() - 1;
    return history;
}

TrainResult train_full(const std::vector<data::Cycle>& train_cycles, const TrainConfig& config,
                       const std::filesystem::path& out_dir) {
    const auto resolved = resolve_config(config, train_cycles);
    std::vector<data::Cycle> smoothed;
    const std::vector<data::Cycle>* source = &train_cycles;
    if (resolved.moving_average_s > 0.0) {
        for (const auto& c : train_cycles) smoothed.push_back(data::moving_average(c, resolved.moving_average_s));
        source = &smoothed;
    }
    const auto norm = data::compute_norm_stats(*source, normalization_horizons(resolved));
    TrainResult result{model::build_model(norm, *resolved.c_rated_ah, resolved.seed), {}, {}, resolved, {}};
    const auto examples = prepare_examples(*source, *resolved.data_horizon_s, 0.0);
    if (examples.empty()) fail(ErrorKind::Data, "training cycles yield no examples at the data horizon");

    if (resolved.joint_training) {
        result.branch2 = train_joint(result.model, examples, resolved);
    } else {
        result.branch1 = train_branch1(result.model, examples, resolved);
        result.branch2 = train_branch2(result.model, examples, resolved);
    }

    if (!out_dir.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());
        result.checkpoint = out_dir / "checkpoint.json";
        model::save_checkpoint(result.model, result.checkpoint);
        csv::write_file_atomic(out_dir / "history.csv", history_csv(result));
        csv::write_file_atomic(out_dir / "config.resolved.json", config_to_json(resolved).dump(2) + "\n");
    }
    return result;
}

std::string history_csv(const TrainResult& result) {
    std::string out =
        "phase,epoch,branch1_train_mae,branch1_val_mae,branch2_data_loss,branch2_physics_loss,branch2_val_loss,"
        "wall_time_s\n";
    auto emit = [&](const TrainHistory& h) {
        for (const auto& r : h.epochs) {
            out += r.phase + "," + std::to_string(r.epoch) + "," + csv::format_number(r.branch1_train_mae) + "," +
                   csv::format_number(r.branch1_val_mae) + "," + csv::format_number(r.branch2_data_loss) + "," +
                   csv::format_number(r.branch2_physics_loss) + "," + csv::format_number(r.branch2_val_loss) + "," +
                   csv::format_number(r.wall_time_s) + "\n";
        }
    };
    emit(result.branch1);
    emit(result.branch2);
    return out;
}

SeedSummary train_seeds(const std::vector<data::Cycle>& train_cycles, const TrainConfig& config,
                        const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir) {
    if (seeds.empty()) fail(ErrorKind::Config, "no seeds given");
    SeedSummary summary;
    for (const auto seed : seeds) {
        TrainConfig c = config;
        c.seed = seed;
        const auto dir = out_dir.empty() ? std::filesystem::path{} : out_dir / ("seed_" + std::to_string(seed));
        const auto r = train_full(train_cycles, c, dir);
        summary.seeds.push_back(seed);
        summary.checkpoints.push_back(r.checkpoint);
        summary.branch1_val_mae.push_back(r.branch1.epochs.empty() ? 0.0 : r.branch1.epochs[r.branch1.best_epoch].branch1_val_mae);
        summary.branch2_val_loss.push_back(r.branch2.epochs.empty() ? 0.0 : r.branch2.epochs[r.branch2.best_epoch].branch2_val_loss);
    }
    if (!out_dir.empty()) {
        auto stats = [](const std::vector<double>& v) {
            const double n = static_cast<double>(v.size());
            const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
            double ss = 0.0;
            for (double x : v) ss += (x - mean) * (x - mean);
            const double std = v.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
            return nlohmann::ordered_json{{"mean", mean}, {"std", std}, {"values", v}};
        };
        nlohmann::ordered_json j;
        j["seeds"] = summary.seeds;
        j["branch1_val_mae"] = stats(summary.branch1_val_mae);
        j["branch2_val_loss"] = stats(summary.branch2_val_loss);
        csv::write_file_atomic(out_dir / "aggregate.json", j.dump(2) + "\n");
    }
    return summary;
}

}  // namespace socpinn::train
