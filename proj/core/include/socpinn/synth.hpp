#pragma once

#include "socpinn/data.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace socpinn::data {

struct OcvPoint {
    double soc = 0.0;
    double voltage_v = 0.0;
};

struct CurrentSegment {
    double duration_s = 0.0;
    double current_a = 0.0;
};

/// Randomized piecewise-constant load, expanded into segments from the spec
/// seed. Expansion stops at `soc_floor` or after `max_duration_s`.
struct RandomProfile {
    double min_current_a = -6.0;
    double max_current_a = 1.5;
    double min_segment_s = 5.0;
    double max_segment_s = 60.0;
    double rest_probability = 0.1;
    double soc_floor = 0.05;
    double soc_ceiling = 0.98;
    double max_duration_s = 7200.0;
};

struct NoiseStd {
    double voltage_v = 0.0;
    double current_a = 0.0;
    double temp_c = 0.0;
};

struct SynthSpec {
    std::string id = "synth";
    std::string chemistry = "nmc";
    /// Piecewise-linear open-circuit voltage, strictly increasing in soc.
    std::vector<OcvPoint> ocv;
    double r0_ohm = 0.05;
    double c_rated_ah = 3.0;
    double soc0 = 1.0;
    std::vector<CurrentSegment> segments;
    std::optional<RandomProfile> random_profile;
    double ambient_temp_c = 25.0;
    NoiseStd noise;
    double sampling_period_s = 10.0;
    std::uint64_t seed = 0;
};

/// A generic NMC-like curve from 3.0 V (empty) to 4.2 V (full) with a flat
/// mid-range plateau.
std::vector<OcvPoint> default_ocv_curve();

double ocv_at(const std::vector<OcvPoint>& curve, double soc);

/// The load the generator will apply: explicit segments, or the random
/// profile expanded with the spec seed.
std::vector<CurrentSegment> resolve_segments(const SynthSpec& spec);

/**
 * Simulates a cycle sampled every `sampling_period_s`.
 *
 * SoC is the exact integral of the commanded piecewise-constant current.
 * Measured voltage is ocv(soc) + I * r0 (so it sags under discharge) plus
 * noise; measured current and temperature get their own noise. Throws
 * Error{Generation} naming the segment that drives SoC outside [0, 1].
 */
Cycle generate_synth_cycle(const SynthSpec& spec);

SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json synth_spec_to_json(const SynthSpec& spec);

}  // namespace socpinn::data
