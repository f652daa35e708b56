#include "bench_data.hpp"

#include <string>

namespace socpinn::testing {

data::SynthSpec drive_spec(std::size_t index, std::uint64_t base_seed, double duration_s) {
    data::SynthSpec spec;
    spec.id = "drive_" + std::to_string(index);
    spec.ocv = data::default_ocv_curve();
    spec.r0_ohm = 0.05;
    spec.c_rated_ah = 3.0;
    spec.soc0 = 0.95;
    data::RandomProfile rp;
    rp.min_current_a = -7.5;
    rp.max_current_a = 2.0;
    rp.min_segment_s = 7.0;
    rp.max_segment_s = 45.0;
    rp.rest_probability = 0.1;
    rp.soc_floor = 0.08;
    rp.soc_ceiling = 0.97;
    rp.max_duration_s = duration_s;
    spec.random_profile = rp;
    spec.ambient_temp_c = 15.0 + 2.0 * static_cast<double>(index % 8);
    spec.noise = {0.005, 0.0, 0.2};
    spec.sampling_period_s = 10.0;
    spec.seed = base_seed * 1000 + index;
    return spec;
}

BenchDataset generalization_dataset(std::uint64_t base_seed, std::size_t n_train, std::size_t n_test,
                                    double duration_s) {
    BenchDataset ds;
    for (std::size_t i = 0; i < n_train + n_test; ++i) {
        auto cycle = data::generate_synth_cycle(drive_spec(i, base_seed, duration_s));
        (i < n_train ? ds.train : ds.test).push_back(std::move(cycle));
    }
    return ds;
}

data::Cycle constant_current_cycle(double current_a, double duration_s, double period_s, double soc0,
                                   double c_rated_ah) {
    data::SynthSpec spec;
    spec.id = "cc";
    spec.ocv = data::default_ocv_curve();
    spec.c_rated_ah = c_rated_ah;
    spec.soc0 = soc0;
    spec.segments = {{duration_s, current_a}};
    spec.sampling_period_s = period_s;
    return data::generate_synth_cycle(spec);
}

}  // namespace socpinn::testing
