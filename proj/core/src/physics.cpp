#include "socpinn/physics.hpp"

#include "socpinn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace socpinn::physics {

double coulomb_count(double soc0, double i_avg_a, double horizon_s, double c_rated_ah) {
    if (!(c_rated_ah > 0.0)) fail(ErrorKind::Config, "rated capacity must be positive");
    if (!(horizon_s >= 0.0)) fail(ErrorKind::Domain, "horizon must be non-negative");
    return soc0 + (i_avg_a * horizon_s) / (c_rated_ah * 3600.0);
}

HorizonSet::HorizonSet(std::vector<double> horizons) : values_(std::move(horizons)) {
    if (values_.empty()) fail(ErrorKind::Config, "horizon set is empty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!(values_[i] > 0.0) || !std::isfinite(values_[i])) fail(ErrorKind::Config, "horizons must be positive");
        for (std::size_t j = 0; j < i; ++j) {
            if (values_[j] == values_[i]) fail(ErrorKind::Config, "horizons must be distinct");
        }
    }
}

double HorizonSet::max() const {
    if (values_.empty()) fail(ErrorKind::Config, "horizon set is empty");
    return *std::max_element(values_.begin(), values_.end());
}

bool HorizonSet::contains(double h) const { return std::find(values_.begin(), values_.end(), h) != values_.end(); }

SamplingPool SamplingPool::discrete(std::vector<double> values) {
    SamplingPool p;
    p.kind = Kind::Discrete;
    p.values = std::move(values);
    return p;
}

SamplingPool SamplingPool::uniform(double lo, double hi) {
    if (!(hi >= lo)) fail(ErrorKind::Config, "uniform pool needs hi >= lo");
    SamplingPool p;
    p.kind = Kind::UniformRange;
    p.lo = lo;
    p.hi = hi;
    return p;
}

double SamplingPool::min_value() const {
    if (kind == Kind::UniformRange) return lo;
    return values.empty() ? 0.0 : *std::min_element(values.begin(), values.end());
}

double SamplingPool::max_value() const {
    if (kind == Kind::UniformRange) return hi;
    return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

namespace {

double draw(const SamplingPool& pool, std::mt19937_64& rng) {
    if (pool.kind == SamplingPool::Kind::UniformRange) {
        if (pool.hi == pool.lo) return pool.lo;
        return std::uniform_real_distribution<double>(pool.lo, pool.hi)(rng);
    }
    std::uniform_int_distribution<std::size_t> pick(0, pool.values.size() - 1);
    return pool.values[pick(rng)];
}

}  // namespace

std::vector<PhysicsCondition> sample_conditions(std::uint64_t seed, std::size_t n, const SamplingPool& current_pool,
                                                const SamplingPool& temp_pool, const HorizonSet& horizons,
                                                HorizonMode mode, double c_rated_ah) {
    if (n == 0) fail(ErrorKind::Config, "condition count must be positive");
    if (current_pool.empty()) fail(ErrorKind::Config, "current pool is empty");
    if (temp_pool.empty()) fail(ErrorKind::Config, "temperature pool is empty");
    if (horizons.empty()) fail(ErrorKind::Config, "horizon set is empty");
    if (mode == HorizonMode::Single && horizons.size() != 1) {
        fail(ErrorKind::Config, "single-horizon mode needs exactly one horizon");
    }
    if (!(c_rated_ah > 0.0)) fail(ErrorKind::Config, "rated capacity must be positive");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick_h(0, horizons.size() - 1);

    constexpr int kMaxAttempts = 1000;
    std::vector<PhysicsCondition> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        int attempt = 0;
        for (;; ++attempt) {
            if (attempt == kMaxAttempts) {
                fail(ErrorKind::Config, "could not draw a physics condition with an in-range target; "
                                        "current pool is too large for the capacity and horizons");
            }
            PhysicsCondition c;
            c.soc0 = unit(rng);
            c.i_avg_a = draw(current_pool, rng);
            c.temp_c = draw(temp_pool, rng);
            c.horizon_s = mode == HorizonMode::Single ? horizons.values().front() : horizons.values()[pick_h(rng)];
            const double target = coulomb_count(c.soc0, c.i_avg_a, c.horizon_s, c_rated_ah);
            if (target >= kTargetLow && target <= kTargetHigh) {
                out.push_back(c);
                break;
            }
        }
    }
    return out;
}

PhysicsLossResult physics_loss(const model::TwoBranchModel& model, const std::vector<PhysicsCondition>& conditions) {
    if (conditions.empty()) fail(ErrorKind::InvalidInput, "physics loss needs at least one condition");
    PhysicsLossResult result;
    result.branch2_grads = nn::Gradients::zeros_like(model.branch2);
    result.residuals.reserve(conditions.size());

    const double n = static_cast<double>(conditions.size());
    nn::ForwardCache cache;
    double sum = 0.0;
    for (const auto& c : conditions) {
        const double target = coulomb_count(c.soc0, c.i_avg_a, c.horizon_s, model.c_rated_ah);
        const auto x = model::branch2_input(model.norm, c.soc0, c.i_avg_a, c.temp_c, c.horizon_s);
        const double pred = model::run_branch2(model, x, &cache);
        const double r = pred - target;
        result.residuals.push_back(r);
        sum += std::abs(r);
        const double dy = r > 0.0 ? 1.0 / n : (r < 0.0 ? -1.0 / n : 0.0);
        if (dy != 0.0) nn::backward_accumulate(model.branch2, cache, dy, result.branch2_grads);
    }
    result.loss = sum / n;
    return result;
}

}  // namespace socpinn::physics
