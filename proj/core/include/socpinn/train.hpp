#pragma once

#include "socpinn/data.hpp"
#include "socpinn/model.hpp"
#include "socpinn/nn.hpp"
#include "socpinn/physics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace socpinn::train {

enum class PhysicsMode { Off, Single, All };

/// How physics conditions draw a quantity.
struct PoolSpec {
    enum class Kind {
        Empirical,      ///< resample the training examples' values
        ObservedRange,  ///< uniform over [min, max] of the training values
        List,           ///< uniform over an explicit list
        Uniform,        ///< uniform over [lo, hi]
    };
    Kind kind = Kind::Empirical;
    std::vector<double> values;
    double lo = 0.0;
    double hi = 0.0;
};

/**
 * Every knob of a training run. Optional fields are filled by
 * `resolve_config` from the training data:
 *   data_horizon_s    -> sampling period of the training cycles
 *   physics_horizons  -> {N, 2N, 3N}
 *   c_rated_ah        -> capacity recorded in the cycle metadata
 */
struct TrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 64;
    nn::OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    std::optional<double> data_horizon_s;
    std::vector<double> physics_horizons;
    PhysicsMode physics_mode = PhysicsMode::All;
    double single_horizon_s = 0.0;
    double physics_weight = 1.0;
    PoolSpec current_pool{PoolSpec::Kind::Empirical, {}, 0.0, 0.0};
    PoolSpec temp_pool{PoolSpec::Kind::ObservedRange, {}, 0.0, 0.0};
    std::size_t patience = 20;
    double validation_fraction = 0.1;
    std::optional<double> c_rated_ah;
    /// Trailing moving-average window applied to V, I, T before windowing; 0 disables it.
    double moving_average_s = 0.0;
    /// Debug: false trains branch 2 on the physics term alone.
    bool data_loss = true;
    /// Debug: train both branches together with gradients flowing from
    /// branch 2 into branch 1 and no teacher forcing.
    bool joint_training = false;
    /// Free-form label carried into reports ("no-pinn", "pinn-all", ...).
    std::string label;
};

std::string physics_mode_string(const TrainConfig& config);
/// "off", "all" or "single:<seconds>".
void set_physics_mode(TrainConfig& config, std::string_view text);

/// Default label derived from the physics mode, e.g. "pinn-all", "pinn-120s".
std::string default_label(const TrainConfig& config);

/// JSON with every field written out, in a fixed order.
nlohmann::ordered_json config_to_json(const TrainConfig& config);
/// Missing fields keep their defaults; unknown fields are a config error.
TrainConfig config_from_json(const nlohmann::json& j);
TrainConfig load_config(const std::filesystem::path& path);

/// Fills optional fields from the training data and validates the result.
TrainConfig resolve_config(const TrainConfig& config, const std::vector<data::Cycle>& train_cycles);

/// Horizon set used to normalize the horizon input: physics horizons, the
/// data horizon and the single-mode horizon.
physics::HorizonSet normalization_horizons(const TrainConfig& resolved);

struct EpochRecord {
    std::string phase;  ///< "branch1", "branch2" or "joint"
    std::size_t epoch = 0;
    double branch1_train_mae = 0.0;
    double branch1_val_mae = 0.0;
    double branch2_data_loss = 0.0;
    double branch2_physics_loss = 0.0;
    double branch2_val_loss = 0.0;
    double wall_time_s = 0.0;
};

struct TrainHistory {
    std::vector<EpochRecord> epochs;
    std::size_t steps = 0;
    bool early_stopped = false;
    std::size_t best_epoch = 0;
};

/// Observation points for tests and tooling. `max_steps` stops training after
/// that many optimizer steps.
struct TrainHooks {
    std::function<void(std::size_t step, const std::vector<physics::PhysicsCondition>&)> on_physics_batch;
    std::function<void(std::size_t step, const model::TwoBranchModel&)> on_step;
    std::optional<std::size_t> max_steps;
};

/// Stride-1 examples at the data horizon, with optional smoothing first.
/// `group` is the cycle's index in `cycles`.
std::vector<data::TrainingExample> prepare_examples(const std::vector<data::Cycle>& cycles, double horizon_s,
                                                    double moving_average_s);

/// Splits off round(fraction * n_g) examples from every group g.
struct ValidationSplit {
    std::vector<data::TrainingExample> train;
    std::vector<data::TrainingExample> validation;
};
ValidationSplit split_validation(const std::vector<data::TrainingExample>& examples, double fraction,
                                 std::uint64_t seed);

/// Supervised SoC(t) regression. Only branch 1 changes.
TrainHistory train_branch1(model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                           const TrainConfig& config, const TrainHooks& hooks = {});

/**
 * Teacher-forced branch-2 training on the data term (MAE at the data
 * horizon) plus physics_weight times the Coulomb-counting term computed on a
 * fresh batch-sized set of physics conditions every step. Branch 1 is neither
 * evaluated nor updated.
 */
TrainHistory train_branch2(model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                           const TrainConfig& config, const TrainHooks& hooks = {});

/// Debug-only joint training (no stop-gradient, cascaded inputs).
TrainHistory train_joint(model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                         const TrainConfig& config, const TrainHooks& hooks = {});

struct TrainResult {
    model::TwoBranchModel model;
    TrainHistory branch1;
    TrainHistory branch2;
    TrainConfig resolved;
    std::filesystem::path checkpoint;
};

/**
 * Normalization from the training cycles, model build, branch 1 then branch 2.
 * When `out_dir` is non-empty it receives checkpoint.json, history.csv and
 * config.resolved.json.
 */
TrainResult train_full(const std::vector<data::Cycle>& train_cycles, const TrainConfig& config,
                       const std::filesystem::path& out_dir = {});

std::string history_csv(const TrainResult& result);

struct SeedSummary {
    std::vector<std::uint64_t> seeds;
    std::vector<std::filesystem::path> checkpoints;
    std::vector<double> branch1_val_mae;
    std::vector<double> branch2_val_loss;
};

/// Runs train_full once per seed into <out_dir>/seed_<s>/ and writes
/// <out_dir>/aggregate.json with mean and std of the final validation losses.
SeedSummary train_seeds(const std::vector<data::Cycle>& train_cycles, const TrainConfig& config,
                        const std::vector<std::uint64_t>& seeds, const std::filesystem::path& out_dir);

/// Per-purpose RNG seed derived from (seed, a, b, tag).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t tag);

}  // namespace socpinn::train
