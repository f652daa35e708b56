#pragma once

#include "socpinn/model.hpp"
#include "socpinn/nn.hpp"

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace socpinn::physics {

/// Coulomb counting under a constant average current:
/// soc0 + i_avg * horizon / (3600 * capacity). Discharge current is negative.
/// The result is deliberately not clamped to [0, 1].
double coulomb_count(double soc0, double i_avg_a, double horizon_s, double c_rated_ah);

/// Ordered set of distinct positive horizons in seconds.
class HorizonSet {
public:
    HorizonSet() = default;
    explicit HorizonSet(std::vector<double> horizons);
    HorizonSet(std::initializer_list<double> horizons) : HorizonSet(std::vector<double>(horizons)) {}

    [[nodiscard]] const std::vector<double>& values() const { return values_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }
    [[nodiscard]] bool empty() const { return values_.empty(); }
    [[nodiscard]] double max() const;
    [[nodiscard]] bool contains(double h) const;

private:
    std::vector<double> values_;
};

struct PhysicsCondition {
    double soc0 = 0.0;
    double i_avg_a = 0.0;
    double temp_c = 0.0;
    double horizon_s = 0.0;
};

/// Either a discrete pool (an empirical sample or an explicit list, drawn
/// uniformly by index) or a continuous uniform range [lo, hi].
struct SamplingPool {
    enum class Kind { Discrete, UniformRange };

    Kind kind = Kind::Discrete;
    std::vector<double> values;
    double lo = 0.0;
    double hi = 0.0;

    static SamplingPool discrete(std::vector<double> values);
    static SamplingPool uniform(double lo, double hi);

    [[nodiscard]] bool empty() const { return kind == Kind::Discrete && values.empty(); }
    [[nodiscard]] double min_value() const;
    [[nodiscard]] double max_value() const;
};

enum class HorizonMode { Single, All };

/// Targets leaving [-0.05, 1.05] are rejected and the condition redrawn.
inline constexpr double kTargetLow = -0.05;
inline constexpr double kTargetHigh = 1.05;

/**
 * Draws `n` label-free conditions: soc0 ~ U[0, 1], current and temperature
 * from their pools, horizon fixed (Single, requires a one-element set) or
 * uniform over the set (All). Conditions whose Coulomb-counting target falls
 * outside [kTargetLow, kTargetHigh] are redrawn. Deterministic in `seed`.
 */
std::vector<PhysicsCondition> sample_conditions(std::uint64_t seed, std::size_t n, const SamplingPool& current_pool,
                                                const SamplingPool& temp_pool, const HorizonSet& horizons,
                                                HorizonMode mode, double c_rated_ah);

struct PhysicsLossResult {
    double loss = 0.0;
    /// prediction - target per condition.
    std::vector<double> residuals;
    /// d(loss)/d(branch2 parameters). Branch 1 never appears in this path.
    nn::Gradients branch2_grads;
};

/// MAE between branch-2 predictions and Coulomb-counting targets. Reads no
/// ground-truth SoC; only branch 2 is evaluated.
PhysicsLossResult physics_loss(const model::TwoBranchModel& model, const std::vector<PhysicsCondition>& conditions);

}  // namespace socpinn::physics
