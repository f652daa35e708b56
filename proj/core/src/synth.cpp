#include "socpinn/synth.hpp"

#include "socpinn/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace socpinn::data {

std::vector<OcvPoint> default_ocv_curve() {
    return {{0.00, 3.00}, {0.05, 3.35}, {0.10, 3.48}, {0.20, 3.58}, {0.30, 3.63}, {0.40, 3.66},
            {0.50, 3.70}, {0.60, 3.77}, {0.70, 3.86}, {0.80, 3.95}, {0.90, 4.06}, {1.00, 4.20}};
}

double ocv_at(const std::vector<OcvPoint>& curve, double soc) {
    if (curve.empty()) fail(ErrorKind::Config, "empty OCV curve");
    if (soc <= curve.front().soc) return curve.front().voltage_v;
    if (soc >= curve.back().soc) return curve.back().voltage_v;
    auto hi = std::upper_bound(curve.begin(), curve.end(), soc,
                               [](double s, const OcvPoint& p) { return s < p.soc; });
    auto lo = hi - 1;
    const double w = (soc - lo->soc) / (hi->soc - lo->soc);
    return lo->voltage_v + w * (hi->voltage_v - lo->voltage_v);
}

namespace {

void validate_spec(const SynthSpec& spec) {
    if (!(spec.c_rated_ah > 0.0)) fail(ErrorKind::Config, "synth spec: capacity must be > 0");
    if (!(spec.sampling_period_s > 0.0)) fail(ErrorKind::Config, "synth spec: sampling period must be > 0");
    if (spec.noise.voltage_v < 0.0 || spec.noise.current_a < 0.0 || spec.noise.temp_c < 0.0) {
        fail(ErrorKind::Config, "synth spec: noise std must be >= 0");
    }
    if (spec.soc0 < 0.0 || spec.soc0 > 1.0) fail(ErrorKind::Config, "synth spec: soc0 must lie in [0, 1]");
    if (spec.r0_ohm < 0.0) fail(ErrorKind::Config, "synth spec: r0 must be >= 0");
    if (spec.ocv.size() < 2) fail(ErrorKind::Config, "synth spec: OCV curve needs at least two points");
    for (std::size_t i = 1; i < spec.ocv.size(); ++i) {
        if (!(spec.ocv[i].soc > spec.ocv[i - 1].soc)) fail(ErrorKind::Config, "synth spec: OCV soc must increase");
    }
    if (spec.segments.empty() && !spec.random_profile) fail(ErrorKind::Config, "synth spec: no current profile");
}

std::vector<CurrentSegment> expand_random(const SynthSpec& spec, const RandomProfile& rp) {
    if (!(rp.max_segment_s >= rp.min_segment_s) || !(rp.min_segment_s > 0.0) ||
        !(rp.max_current_a >= rp.min_current_a) || !(rp.soc_ceiling > rp.soc_floor) || !(rp.max_duration_s > 0.0)) {
        fail(ErrorKind::Config, "synth spec: random profile bounds are inconsistent");
    }
    // Separate stream from the measurement noise so the load does not shift
    // when noise levels change.
    std::mt19937_64 rng(spec.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> duration(rp.min_segment_s, rp.max_segment_s);
    std::uniform_real_distribution<double> current(rp.min_current_a, rp.max_current_a);
    std::bernoulli_distribution rest(rp.rest_probability);

    const double scale = 1.0 / (spec.c_rated_ah * 3600.0);
    std::vector<CurrentSegment> out;
    double soc = spec.soc0;
    double elapsed = 0.0;
    while (elapsed < rp.max_duration_s) {
        CurrentSegment seg{duration(rng), current(rng)};
        if (rest(rng)) seg.current_a = 0.0;
        seg.duration_s = std::min(seg.duration_s, rp.max_duration_s - elapsed);
        double next = soc + seg.current_a * seg.duration_s * scale;
        bool stop = false;
        if (seg.current_a < 0.0 && next < rp.soc_floor) {
            seg.duration_s = (rp.soc_floor - soc) / (seg.current_a * scale);
            next = rp.soc_floor;
            stop = true;
        } else if (seg.current_a > 0.0 && next > rp.soc_ceiling) {
            seg.duration_s = (rp.soc_ceiling - soc) / (seg.current_a * scale);
            next = rp.soc_ceiling;
        }
        if (seg.duration_s > 0.0) out.push_back(seg);
        soc = next;
        elapsed += seg.duration_s;
        if (stop) break;
    }
    return out;
}

}  // namespace

std::vector<CurrentSegment> resolve_segments(const SynthSpec& spec) {
    validate_spec(spec);
    if (!spec.segments.empty()) return spec.segments;
    return expand_random(spec, *spec.random_profile);
}

Cycle generate_synth_cycle(const SynthSpec& spec) {
    const auto segments = resolve_segments(spec);
    const double scale = 1.0 / (spec.c_rated_ah * 3600.0);

    // Segment start times and the SoC at each start.
    std::vector<double> start_t{0.0};
    std::vector<double> start_soc{spec.soc0};
    constexpr double kSlack = 1e-12;
    for (std::size_t k = 0; k < segments.size(); ++k) {
        if (!(segments[k].duration_s > 0.0)) {
            fail(ErrorKind::Generation, "segment " + std::to_string(k) + " has non-positive duration");
        }
        const double end_soc = start_soc.back() + segments[k].current_a * segments[k].duration_s * scale;
        if (end_soc < -kSlack || end_soc > 1.0 + kSlack) {
            fail(ErrorKind::Generation, "segment " + std::to_string(k) + " drives SoC to " + std::to_string(end_soc) +
                                            ", outside [0, 1]");
        }
        start_t.push_back(start_t.back() + segments[k].duration_s);
        start_soc.push_back(end_soc);
    }
    const double total = start_t.back();

    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    Cycle cycle;
    cycle.id = spec.id;
    cycle.meta.source = Source::Synthetic;
    cycle.meta.chemistry = spec.chemistry;
    cycle.meta.profile = spec.random_profile && spec.segments.empty() ? "random" : "segments";
    cycle.meta.ambient_temp_c = spec.ambient_temp_c;
    cycle.meta.sampling_period_s = spec.sampling_period_s;
    cycle.meta.c_rated_ah = spec.c_rated_ah;
    double max_charge = 0.0, max_discharge = 0.0;
    for (const auto& s : segments) {
        max_charge = std::max(max_charge, s.current_a / spec.c_rated_ah);
        max_discharge = std::min(max_discharge, s.current_a / spec.c_rated_ah);
    }
    cycle.meta.c_rate_charge = max_charge;
    cycle.meta.c_rate_discharge = max_discharge;

    const auto n = static_cast<std::size_t>(std::floor(total / spec.sampling_period_s + 1e-9)) + 1;
    std::size_t seg = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const double t = static_cast<double>(j) * spec.sampling_period_s;
        while (seg + 1 < segments.size() && t >= start_t[seg + 1]) ++seg;
        const double current = segments[seg].current_a;
        const double soc = std::clamp(start_soc[seg] + current * (t - start_t[seg]) * scale, 0.0, 1.0);
        Sample s;
        s.time_s = t;
        s.soc = soc;
        s.voltage_v = ocv_at(spec.ocv, soc) + current * spec.r0_ohm;
        s.current_a = current;
        s.temp_c = spec.ambient_temp_c;
        // Draw all three every sample so streams stay aligned across specs.
        const double nv = gauss(rng), ni = gauss(rng), nt = gauss(rng);
        s.voltage_v += spec.noise.voltage_v * nv;
        s.current_a += spec.noise.current_a * ni;
        s.temp_c += spec.noise.temp_c * nt;
        cycle.samples.push_back(s);
    }
    if (cycle.samples.size() < 2) fail(ErrorKind::Generation, "profile is shorter than one sampling period");
    return cycle;
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    SynthSpec spec;
    try {
        spec.id = j.value("id", spec.id);
        spec.chemistry = j.value("chemistry", spec.chemistry);
        if (j.contains("ocv")) {
            for (const auto& p : j.at("ocv")) spec.ocv.push_back({p.at("soc").get<double>(), p.at("voltage_v").get<double>()});
        } else {
            spec.ocv = default_ocv_curve();
        }
        spec.r0_ohm = j.value("r0_ohm", spec.r0_ohm);
        spec.c_rated_ah = j.value("c_rated_ah", spec.c_rated_ah);
        spec.soc0 = j.value("soc0", spec.soc0);
        if (j.contains("segments")) {
            for (const auto& s : j.at("segments")) {
                spec.segments.push_back({s.at("duration_s").get<double>(), s.at("current_a").get<double>()});
            }
        }
        if (j.contains("random_profile")) {
            const auto& r = j.at("random_profile");
            RandomProfile rp;
            rp.min_current_a = r.value("min_current_a", rp.min_current_a);
            rp.max_current_a = r.value("max_current_a", rp.max_current_a);
            rp.min_segment_s = r.value("min_segment_s", rp.min_segment_s);
            rp.max_segment_s = r.value("max_segment_s", rp.max_segment_s);
            rp.rest_probability = r.value("rest_probability", rp.rest_probability);
            rp.soc_floor = r.value("soc_floor", rp.soc_floor);
            rp.soc_ceiling = r.value("soc_ceiling", rp.soc_ceiling);
            rp.max_duration_s = r.value("max_duration_s", rp.max_duration_s);
            spec.random_profile = rp;
        }
        spec.ambient_temp_c = j.value("ambient_temp_c", spec.ambient_temp_c);
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            spec.noise.voltage_v = n.value("voltage_v", 0.0);
            spec.noise.current_a = n.value("current_a", 0.0);
            spec.noise.temp_c = n.value("temp_c", 0.0);
        }
        spec.sampling_period_s = j.value("sampling_period_s", spec.sampling_period_s);
        spec.seed = j.value("seed", spec.seed);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("synth spec: ") + e.what());
    }
    validate_spec(spec);
    return spec;
}

nlohmann::ordered_json synth_spec_to_json(const SynthSpec& spec) {
    nlohmann::ordered_json j;
    j["id"] = spec.id;
    j["chemistry"] = spec.chemistry;
    auto& ocv = j["ocv"] = nlohmann::ordered_json::array();
    for (const auto& p : spec.ocv) ocv.push_back({{"soc", p.soc}, {"voltage_v", p.voltage_v}});
    j["r0_ohm"] = spec.r0_ohm;
    j["c_rated_ah"] = spec.c_rated_ah;
    j["soc0"] = spec.soc0;
    auto& segs = j["segments"] = nlohmann::ordered_json::array();
    for (const auto& s : spec.segments) segs.push_back({{"duration_s", s.duration_s}, {"current_a", s.current_a}});
    if (spec.random_profile) {
        const auto& r = *spec.random_profile;
        j["random_profile"] = {{"min_current_a", r.min_current_a},     {"max_current_a", r.max_current_a},
                               {"min_segment_s", r.min_segment_s},     {"max_segment_s", r.max_segment_s},
                               {"rest_probability", r.rest_probability}, {"soc_floor", r.soc_floor},
                               {"soc_ceiling", r.soc_ceiling},         {"max_duration_s", r.max_duration_s}};
    }
    j["ambient_temp_c"] = spec.ambient_temp_c;
    j["noise"] = {{"voltage_v", spec.noise.voltage_v}, {"current_a", spec.noise.current_a}, {"temp_c", spec.noise.temp_c}};
    j["sampling_period_s"] = spec.sampling_period_s;
    j["seed"] = spec.seed;
    return j;
}

}  // namespace socpinn::data
