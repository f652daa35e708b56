#pragma once

#include "socpinn/nn.hpp"

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string_view>

namespace socpinn::model {

/// Min-max range for one input feature, mapped onto [0, 1].
struct FeatureRange {
    double min = 0.0;
    double max = 1.0;

    [[nodiscard]] double normalize(double x) const { return (x - min) / (max - min); }
    [[nodiscard]] double denormalize(double u) const { return min + u * (max - min); }
    [[nodiscard]] bool contains(double x) const { return x >= min && x <= max; }
};

/// Training-set statistics. SoC is never normalized.
struct NormStats {
    FeatureRange voltage;
    FeatureRange current;
    FeatureRange temperature;
    FeatureRange horizon;

    /// Throws Error{Config} naming the first feature with max <= min or a
    /// non-finite bound.
    void validate() const;
};

inline constexpr std::array<std::size_t, 5> kBranch1Dims{3, 16, 32, 16, 1};
inline constexpr std::array<std::size_t, 5> kBranch2Dims{4, 16, 32, 16, 1};

/**
 * Cascaded SoC network.
 *
 * branch1 maps (V(t), I(t), T(t)) to SoC(t). branch2 maps
 * (SoC(t), mean current, mean temperature, horizon) to SoC(t + horizon).
 * Outputs are raw regression values; nothing is clamped here.
 */
struct TwoBranchModel {
    nn::Mlp branch1;
    nn::Mlp branch2;
    NormStats norm;
    double c_rated_ah = 0.0;
};

TwoBranchModel build_model(const NormStats& norm, double c_rated_ah, std::uint64_t seed);

std::size_t param_count(const TwoBranchModel& model);

/// Multiply-accumulate count of one forward pass, counting each bias add as
/// one operation (so it equals the parameter count for dense layers).
std::size_t mac_count(const nn::Mlp& mlp);

/// Bytes needed to store every parameter as float32.
std::size_t float32_bytes(const TwoBranchModel& model);

std::array<double, 3> branch1_input(const NormStats& norm, double voltage_v, double current_a, double temp_c);
std::array<double, 4> branch2_input(const NormStats& norm, double soc_t, double i_avg_a, double t_avg_c,
                                    double horizon_s);

/// Every branch-1 forward evaluation made through this module increments
/// `branch1_forward_calls`; training code relies on it to audit teacher
/// forcing.
struct ForwardCounters {
    std::atomic<std::uint64_t> branch1_forward_calls{0};
    std::atomic<std::uint64_t> branch2_forward_calls{0};
};
ForwardCounters& forward_counters();

/// Forward through branch 1 on already-normalized inputs, counted.
double run_branch1(const TwoBranchModel& model, std::span<const double> x, nn::ForwardCache* cache = nullptr);
/// Forward through branch 2 on already-normalized inputs, counted.
double run_branch2(const TwoBranchModel& model, std::span<const double> x, nn::ForwardCache* cache = nullptr);

double estimate_soc_now(const TwoBranchModel& model, double voltage_v, double current_a, double temp_c);

double predict_soc_future(const TwoBranchModel& model, double soc_t, double i_avg_a, double t_avg_c,
                          double horizon_s);

struct CascadedPrediction {
    double soc_now = 0.0;
    double soc_future = 0.0;
};

CascadedPrediction predict_cascaded(const TwoBranchModel& model, double voltage_v, double current_a, double temp_c,
                                    double i_avg_a, double t_avg_c, double horizon_s);

/// True when the horizon lies outside the normalization range seen in training.
bool horizon_extrapolates(const TwoBranchModel& model, double horizon_s);

inline constexpr int kCheckpointSchemaVersion = 1;

std::string checkpoint_to_string(const TwoBranchModel& model);
TwoBranchModel checkpoint_from_string(std::string_view text);

/// Writes via a temporary file and rename so readers never see a partial file.
void save_checkpoint(const TwoBranchModel& model, const std::filesystem::path& path);
TwoBranchModel load_checkpoint(const std::filesystem::path& path);

}  // namespace socpinn::model
