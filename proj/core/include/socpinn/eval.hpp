#pragma once

#include "socpinn/data.hpp"
#include "socpinn/model.hpp"
#include "socpinn/physics.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace socpinn::eval {

enum class EvalMode { Cascaded, TeacherForced, Branch1Only };

std::string_view to_string(EvalMode mode);
/// "cascaded", "teacher-forced" or "branch1" (alias "branch1-only").
EvalMode eval_mode_from_string(std::string_view name);

/// Report-side clamp of a SoC prediction onto [0, 1].
double clamp_soc(double soc);

struct Predictions {
    std::vector<double> raw;
    std::vector<double> target;
};

/// Raw model outputs and matching targets for every example.
Predictions predict_examples(const model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                             EvalMode mode);

/// MAE after clamping predictions to [0, 1]. Throws on an empty set.
double eval_mae(const model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples, EvalMode mode);

/// MAE of unclamped predictions.
double eval_mae_raw(const model::TwoBranchModel& model, const std::vector<data::TrainingExample>& examples,
                    EvalMode mode);

/// Coulomb counting from the ground-truth SoC at the window start. Uses no
/// learned parameters.
double physics_only_predict(double soc_now, double i_avg_a, double horizon_s, double c_rated_ah);

/// Clamped and raw MAE of physics_only_predict over the examples.
struct MaePair {
    double mae = 0.0;
    double raw_mae = 0.0;
};
MaePair physics_only_mae(const std::vector<data::TrainingExample>& examples, double c_rated_ah);

/// One trained model in an evaluation, identified by its config label and seed.
struct EvalModel {
    std::string config;
    std::uint64_t seed = 0;
    model::TwoBranchModel model;
    /// SHA-256 of the checkpoint file, or empty when the model never touched disk.
    std::string checkpoint_sha256;
};

struct ReportRow {
    std::string config;
    std::optional<std::uint64_t> seed;  ///< empty for Physics-Only
    std::string mode;                   ///< eval mode or "physics-only"
    double horizon_s = 0.0;
    double mae = 0.0;
    double raw_mae = 0.0;
    std::size_t n_examples = 0;
};

struct AggregateRow {
    std::string config;
    std::string mode;
    double horizon_s = 0.0;
    double mean = 0.0;
    double std = 0.0;  ///< sample standard deviation; 0 for one seed
    std::size_t n_seeds = 0;
};

struct EvalReport {
    std::string dataset_id;
    std::vector<double> horizons;
    std::vector<std::string> modes;
    /// Model identities and evaluation settings, hashed into config_hash.
    nlohmann::ordered_json config;
    std::string config_hash;
    /// Parameter, MAC and storage counts of the first model; null without models.
    nlohmann::ordered_json accounting;
    std::vector<ReportRow> rows;
    std::vector<AggregateRow> aggregates;
};

struct EvalOptions {
    std::vector<EvalMode> modes{EvalMode::Cascaded};
    bool physics_only = true;
    double moving_average_s = 0.0;
    /// Worker threads for the (model, horizon, mode) tuples; 0 means one.
    std::size_t threads = 1;
};

/**
 * Evaluates every model on every horizon and mode, plus one model-free
 * Physics-Only row per horizon. Row order is models (in input order) then
 * horizons then modes, followed by the Physics-Only rows; aggregates follow
 * the order in which (config, mode, horizon) first appears.
 */
EvalReport multi_horizon_eval(const std::vector<EvalModel>& models, const std::vector<data::Cycle>& test_cycles,
                              const physics::HorizonSet& horizons, const std::string& dataset_id,
                              const EvalOptions& options = {});

/// Mean and sample std per (config, mode, horizon) over the seed rows.
std::vector<AggregateRow> aggregate(const std::vector<ReportRow>& rows);

enum class RolloutMode { Pinn, NoPinn, PhysicsOnly };
std::string_view to_string(RolloutMode mode);
RolloutMode rollout_mode_from_string(std::string_view name);

struct RolloutOptions {
    /// Replaces the branch-1 estimate at step 0.
    std::optional<double> initial_soc;
    /// Smoothing applied to V, I and T before the rollout; 0 disables it.
    double moving_average_s = 0.0;
    /// Capacity for physics-only steps; defaults to the model's, then the cycle's.
    std::optional<double> c_rated_ah;
};

struct RolloutResult {
    std::string cycle_id;
    std::string mode;
    double horizon_s = 0.0;
    std::vector<double> time_s;
    std::vector<double> predicted;
    std::vector<double> truth;
    std::vector<double> abs_error;
    double final_error = 0.0;
};

/**
 * Autoregressive prediction on the grid t_j = j * horizon. Step 0 is branch 1
 * on the first sample (or the oracle initial SoC); each later step feeds the
 * previous prediction with the true mean current and temperature of the
 * window (t_{j-1}, t_j] into branch 2, or into Coulomb counting in
 * physics-only mode. Voltage is read only at step 0. Predictions are not
 * clamped. `model` may be null only in physics-only mode with an initial SoC.
 */
RolloutResult rollout(const model::TwoBranchModel* model, const data::Cycle& cycle, double horizon_s,
                      RolloutMode mode, const RolloutOptions& options = {});

/// Writes report.json, report.csv and plots/<config>__<mode>.dat into `out_dir`.
void emit_report(const EvalReport& report, const std::filesystem::path& out_dir);
/// Writes rollout_<cycle>.csv and plots/rollout_<cycle>.dat into `out_dir`.
void emit_rollout(const RolloutResult& result, const std::filesystem::path& out_dir);

std::string report_csv(const EvalReport& report);
nlohmann::ordered_json report_json(const EvalReport& report);
std::string rollout_csv(const RolloutResult& result);

/// Per-branch parameter and MAC counts plus float32 storage of a model.
nlohmann::ordered_json accounting_json(const model::TwoBranchModel& model);

}  // namespace socpinn::eval
