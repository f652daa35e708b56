#include "socpinn/model.hpp"

#include "socpinn/errors.hpp"

#include <cmath>
#include <string>

namespace socpinn::model {

namespace {

void require_finite(double v, const char* name) {
    if (!std::isfinite(v)) fail(ErrorKind::Numeric, std::string("non-finite ") + name);
}

void validate_range(const FeatureRange& r, const char* name) {
    if (!std::isfinite(r.min) || !std::isfinite(r.max)) {
        fail(ErrorKind::Config, std::string("normalization range for ") + name + " is not finite");
    }
    if (!(r.max > r.min)) {
        fail(ErrorKind::Config, std::string("degenerate normalization range for ") + name + " (max <= min)");
    }
}

}  // namespace

void NormStats::validate() const {
    validate_range(voltage, "voltage");
    validate_range(current, "current");
    validate_range(temperature, "temperature");
    validate_range(horizon, "horizon");
}

TwoBranchModel build_model(const NormStats& norm, double c_rated_ah, std::uint64_t seed) {
    norm.validate();
    if (!(c_rated_ah > 0.0) || !std::isfinite(c_rated_ah)) fail(ErrorKind::Config, "rated capacity must be > 0");
    TwoBranchModel model;
    // Distinct streams per branch so branch2 init does not depend on branch1 dims.
    model.branch1 = nn::init_mlp(kBranch1Dims, seed * 2 + 0x5eed0001ULL);
    model.branch2 = nn::init_mlp(kBranch2Dims, seed * 2 + 0x5eed0002ULL);
    model.norm = norm;
    model.c_rated_ah = c_rated_ah;
    return model;
}

std::size_t param_count(const TwoBranchModel& model) {
    return model.branch1.param_count() + model.branch2.param_count();
}

std::size_t mac_count(const nn::Mlp& mlp) {
    std::size_t n = 0;
    for (const auto& layer : mlp.layers()) n += layer.in_dim * layer.out_dim + layer.out_dim;
    return n;
}

std::size_t float32_bytes(const TwoBranchModel& model) { return param_count(model) * sizeof(float); }

std::array<double, 3> branch1_input(const NormStats& norm, double voltage_v, double current_a, double temp_c) {
    return {norm.voltage.normalize(voltage_v), norm.current.normalize(current_a), norm.temperature.normalize(temp_c)};
}

std::array<double, 4> branch2_input(const NormStats& norm, double soc_t, double i_avg_a, double t_avg_c,
                                    double horizon_s) {
    return {soc_t, norm.current.normalize(i_avg_a), norm.temperature.normalize(t_avg_c),
            norm.horizon.normalize(horizon_s)};
}

ForwardCounters& forward_counters() {
    static ForwardCounters counters;
    return counters;
}

double run_branch1(const TwoBranchModel& model, std::span<const double> x, nn::ForwardCache* cache) {
    forward_counters().branch1_forward_calls.fetch_add(1, std::memory_order_relaxed);
    return cache != nullptr ? nn::forward(model.branch1, x, *cache) : nn::predict(model.branch1, x);
}

double run_branch2(const TwoBranchModel& model, std::span<const double> x, nn::ForwardCache* cache) {
    forward_counters().branch2_forward_calls.fetch_add(1, std::memory_order_relaxed);
    return cache != nullptr ? nn::forward(model.branch2, x, *cache) : nn::predict(model.branch2, x);
}

double estimate_soc_now(const TwoBranchModel& model, double voltage_v, double current_a, double temp_c) {
    require_finite(voltage_v, "voltage");
    require_finite(current_a, "current");
    require_finite(temp_c, "temperature");
    const auto x = branch1_input(model.norm, voltage_v, current_a, temp_c);
    return run_branch1(model, x);
}

double predict_soc_future(const TwoBranchModel& model, double soc_t, double i_avg_a, double t_avg_c,
                          double horizon_s) {
    require_finite(soc_t, "soc");
    require_finite(i_avg_a, "average current");
    require_finite(t_avg_c, "average temperature");
    require_finite(horizon_s, "horizon");
    if (!(horizon_s > 0.0)) fail(ErrorKind::Domain, "prediction horizon must be positive");
    const auto x = branch2_input(model.norm, soc_t, i_avg_a, t_avg_c, horizon_s);
    return run_branch2(model, x);
}

CascadedPrediction predict_cascaded(const TwoBranchModel& model, double voltage_v, double current_a, double temp_c,
                                    double i_avg_a, double t_avg_c, double horizon_s) {
    CascadedPrediction p;
    p.soc_now = estimate_soc_now(model, voltage_v, current_a, temp_c);
    p.soc_future = predict_soc_future(model, p.soc_now, i_avg_a, t_avg_c, horizon_s);
    return p;
}

bool horizon_extrapolates(const TwoBranchModel& model, double horizon_s) {
    return !model.norm.horizon.contains(horizon_s);
}

}  // namespace socpinn::model
