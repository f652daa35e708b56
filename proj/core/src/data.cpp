#include "socpinn/data.hpp"

#include "socpinn/csv.hpp"
#include "socpinn/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace socpinn::data {

namespace {

using Json = nlohmann::ordered_json;

std::string join_rows(const std::vector<std::size_t>& rows, std::size_t limit = 20) {
    std::ostringstream os;
    for (std::size_t i = 0; i < rows.size() && i < limit; ++i) os << (i ? ", " : "") << rows[i];
    if (rows.size() > limit) os << ", ... (" << rows.size() << " total)";
    return os.str();
}

double median_step(const std::vector<Sample>& samples) {
    std::vector<double> steps;
    steps.reserve(samples.size());
    for (std::size_t i = 1; i < samples.size(); ++i) steps.push_back(samples[i].time_s - samples[i - 1].time_s);
    if (steps.empty()) return 0.0;
    std::nth_element(steps.begin(), steps.begin() + static_cast<std::ptrdiff_t>(steps.size() / 2), steps.end());
    return steps[steps.size() / 2];
}

bool nearly_integer(double x, double& rounded) {
    rounded = std::round(x);
    return std::abs(x - rounded) <= 1e-9 * std::max(1.0, std::abs(x));
}

}  // namespace

std::string_view to_string(Source source) {
    switch (source) {
        case Source::Sandia: return "sandia";
        case Source::Lg: return "lg";
        case Source::Synthetic: return "synthetic";
        case Source::Generic: return "generic";
    }
    return "generic";
}

Source source_from_string(std::string_view name) {
    if (name == "sandia") return Source::Sandia;
    if (name == "lg") return Source::Lg;
    if (name == "synthetic") return Source::Synthetic;
    if (name == "generic") return Source::Generic;
    fail(ErrorKind::Parse, "unknown cycle source '" + std::string(name) + "'");
}

void Cycle::validate() const {
    if (samples.size() < 2) fail(ErrorKind::Data, "cycle '" + id + "' has fewer than 2 samples");
    if (!(meta.sampling_period_s > 0.0)) fail(ErrorKind::Data, "cycle '" + id + "' has no positive sampling period");
    std::vector<std::size_t> bad;
    for (std::size_t i = 1; i < samples.size(); ++i) {
        if (!(samples[i].time_s > samples[i - 1].time_s)) bad.push_back(i);
    }
    if (!bad.empty()) {
        fail(ErrorKind::Data, "cycle '" + id + "': time is not strictly increasing at sample(s) " + join_rows(bad));
    }
}

CsvSchema CsvSchema::sandia() {
    return {SchemaKind::Sandia,
            {"Test_Time (s)", "Voltage (V)", "Current (A)", "Cell_Temperature (C)", std::nullopt, std::nullopt}};
}

CsvSchema CsvSchema::lg() {
    return {SchemaKind::Lg, {"Prog Time", "Voltage", "Current", "Temperature", std::nullopt, "Capacity"}};
}

CsvSchema CsvSchema::generic(ColumnMapping columns) { return {SchemaKind::Generic, std::move(columns)}; }

CsvSchema CsvSchema::canonical() {
    return generic({"time_s", "voltage_v", "current_a", "temp_c", "soc", std::nullopt});
}

SchemaKind schema_kind_from_string(std::string_view name) {
    if (name == "sandia") return SchemaKind::Sandia;
    if (name == "lg") return SchemaKind::Lg;
    if (name == "generic") return SchemaKind::Generic;
    fail(ErrorKind::Config, "unknown schema '" + std::string(name) + "' (expected sandia, lg or generic)");
}

Cycle parse_cycle_csv(const std::filesystem::path& path, const CsvSchema& schema, const ParseOptions& options) {
    const auto lines = csv::read_lines(path);
    const auto& cols = schema.columns;
    std::vector<std::string> required{cols.time_s, cols.voltage_v, cols.current_a, cols.temp_c};

    // Instrument exports may carry a preamble; the header is the first line
    // that names every required column.
    constexpr std::size_t kMaxPreamble = 200;
    std::size_t header_line = lines.size();
    std::vector<std::string> header;
    for (std::size_t i = 0; i < lines.size() && i < kMaxPreamble; ++i) {
        auto fields = csv::split_line(lines[i]);
        const bool all = std::all_of(required.begin(), required.end(), [&](const std::string& name) {
            return std::find(fields.begin(), fields.end(), name) != fields.end();
        });
        if (all) {
            header_line = i;
            header = std::move(fields);
            break;
        }
    }
    if (header_line == lines.size()) {
        auto first = lines.empty() ? std::vector<std::string>{} : csv::split_line(lines.front());
        std::vector<std::string> missing;
        for (const auto& name : required) {
            if (std::find(first.begin(), first.end(), name) == first.end()) missing.push_back(name);
        }
        std::string list;
        for (const auto& m : missing) list += (list.empty() ? "" : ", ") + ("'" + m + "'");
        fail(ErrorKind::Schema, path.string() + ": missing required column(s) " + list);
    }

    auto index_of = [&](const std::optional<std::string>& name) -> std::optional<std::size_t> {
        if (!name) return std::nullopt;
        auto it = std::find(header.begin(), header.end(), *name);
        if (it == header.end()) return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t i_time = *index_of(cols.time_s);
    const std::size_t i_v = *index_of(cols.voltage_v);
    const std::size_t i_i = *index_of(cols.current_a);
    const std::size_t i_t = *index_of(cols.temp_c);
    const auto i_soc = index_of(cols.soc);
    const auto i_cap = index_of(cols.capacity_ah);
    if (cols.soc && !i_soc && schema.kind == SchemaKind::Generic && !cols.capacity_ah && !options.initial_soc) {
        fail(ErrorKind::Schema, path.string() + ": missing column '" + *cols.soc + "'");
    }

    Cycle cycle;
    cycle.id = options.id.empty() ? path.stem().string() : options.id;
    cycle.meta = options.meta;
    cycle.meta.source = schema.kind == SchemaKind::Sandia ? Source::Sandia
                        : schema.kind == SchemaKind::Lg   ? Source::Lg
                                                          : options.meta.source;

    std::vector<double> capacity;
    std::vector<std::size_t> rejected;
    std::vector<std::size_t> line_of_sample;
    for (std::size_t ln = header_line + 1; ln < lines.size(); ++ln) {
        if (lines[ln].find_first_not_of(" \t,") == std::string::npos) continue;
        const auto fields = csv::split_line(lines[ln]);
        auto get = [&](std::size_t idx) -> std::optional<double> {
            if (idx >= fields.size()) return std::nullopt;
            return csv::parse_number(fields[idx]);
        };
        Sample s;
        std::optional<double> t;
        if (i_time < fields.size()) t = csv::parse_seconds(fields[i_time]);
        const auto v = get(i_v);
        const auto c = get(i_i);
        const auto temp = get(i_t);
        std::optional<double> soc = i_soc ? get(*i_soc) : std::optional<double>(0.0);
        std::optional<double> cap = i_cap ? get(*i_cap) : std::optional<double>(0.0);
        const bool ok = t && v && c && temp && soc && cap && std::isfinite(*t) && std::isfinite(*v) &&
                        std::isfinite(*c) && std::isfinite(*temp) && std::isfinite(*soc) && std::isfinite(*cap);
        if (!ok) {
            rejected.push_back(ln + 1);
            continue;
        }
        s.time_s = *t;
        s.voltage_v = *v;
        s.current_a = *c;
        s.temp_c = *temp;
        s.soc = *soc;
        cycle.samples.push_back(s);
        capacity.push_back(*cap);
        line_of_sample.push_back(ln + 1);
    }
    if (!rejected.empty()) {
        warn(path.string() + ": rejected " + std::to_string(rejected.size()) +
             " row(s) with missing or non-finite values at line(s) " + join_rows(rejected));
    }

    std::vector<std::size_t> backwards;
    for (std::size_t i = 1; i < cycle.samples.size(); ++i) {
        if (!(cycle.samples[i].time_s > cycle.samples[i - 1].time_s)) backwards.push_back(line_of_sample[i]);
    }
    if (!backwards.empty()) {
        fail(ErrorKind::Data, path.string() + ": time is not strictly increasing at line(s) " + join_rows(backwards));
    }
    if (cycle.samples.size() < 2) fail(ErrorKind::Data, path.string() + ": fewer than 2 valid rows");

    // Time is stored relative to the cycle start.
    const double t0 = cycle.samples.front().time_s;
    for (auto& s : cycle.samples) s.time_s -= t0;
    if (!(cycle.meta.sampling_period_s > 0.0)) cycle.meta.sampling_period_s = median_step(cycle.samples);

    if (!i_soc) {
        if (cycle.meta.c_rated_ah <= 0.0) {
            fail(ErrorKind::Config, path.string() + ": rated capacity is needed to derive SoC");
        }
        if (i_cap) {
            // Capacity columns count charge moved since the start of the record.
            const double anchor = options.initial_soc.value_or(1.0);
            bool clipped = false;
            for (std::size_t i = 0; i < cycle.samples.size(); ++i) {
                double soc = anchor + (capacity[i] - capacity.front()) / cycle.meta.c_rated_ah;
                if (soc < -0.02 || soc > 1.02) clipped = true;
                cycle.samples[i].soc = std::clamp(soc, 0.0, 1.0);
            }
            if (clipped) warn(path.string() + ": SoC derived from capacity left [0, 1] by more than 0.02; clipped");
        } else {
            const double capacity_ah = cycle.meta.c_rated_ah;
            cycle = derive_soc(std::move(cycle), capacity_ah, options.initial_soc);
        }
    } else {
        for (std::size_t i = 0; i < cycle.samples.size(); ++i) {
            const double soc = cycle.samples[i].soc;
            if (soc < 0.0 || soc > 1.0) {
                fail(ErrorKind::Data, path.string() + ": SoC outside [0, 1] at line " + std::to_string(line_of_sample[i]));
            }
        }
    }
    return cycle;
}

Cycle derive_soc(Cycle cycle, double c_rated_ah, std::optional<double> initial_soc) {
    if (!(c_rated_ah > 0.0)) fail(ErrorKind::Config, "rated capacity must be positive");
    if (cycle.samples.empty()) fail(ErrorKind::Data, "cycle '" + cycle.id + "' has no samples");
    double soc0 = 0.0;
    if (initial_soc) {
        soc0 = *initial_soc;
    } else {
        auto first = std::find_if(cycle.samples.begin(), cycle.samples.end(),
                                  [](const Sample& s) { return s.current_a != 0.0; });
        if (first == cycle.samples.end()) {
            fail(ErrorKind::Config, "cycle '" + cycle.id + "': no SoC anchor (current is zero throughout); "
                                    "supply an explicit initial SoC");
        }
        soc0 = first->current_a < 0.0 ? 1.0 : 0.0;
    }

    const double scale = 1.0 / (c_rated_ah * 3600.0);
    double charge_as = 0.0;  // ampere-seconds since the first sample
    double worst = 0.0;
    auto& s = cycle.samples;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) charge_as += 0.5 * (s[i].current_a + s[i - 1].current_a) * (s[i].time_s - s[i - 1].time_s);
        const double soc = soc0 + charge_as * scale;
        worst = std::max({worst, -soc, soc - 1.0});
        s[i].soc = std::clamp(soc, 0.0, 1.0);
    }
    if (worst > 0.02) {
        warn("cycle '" + cycle.id + "': integrated SoC left [0, 1] by " + csv::format_number(worst) + "; clipped");
    }
    return cycle;
}

Cycle moving_average(Cycle cycle, double window_s, Channels channels) {
    const double period = cycle.meta.sampling_period_s;
    if (!(window_s > 0.0) || window_s < period * (1.0 - 1e-9)) {
        fail(ErrorKind::Config, "moving-average window must be at least one sampling period");
    }
    const auto original = cycle.samples;
    const double tol = 1e-9 * window_s;
    std::size_t start = 0;
    for (std::size_t i = 0; i < original.size(); ++i) {
        while (original[i].time_s - original[start].time_s >= window_s - tol) ++start;
        const double n = static_cast<double>(i - start + 1);
        // Deviations from the newest sample keep constant series exact.
        double dv = 0.0, di = 0.0, dt = 0.0;
        for (std::size_t j = start; j <= i; ++j) {
            dv += original[j].voltage_v - original[i].voltage_v;
            di += original[j].current_a - original[i].current_a;
            dt += original[j].temp_c - original[i].temp_c;
        }
        if (channels.voltage) cycle.samples[i].voltage_v = original[i].voltage_v + dv / n;
        if (channels.current) cycle.samples[i].current_a = original[i].current_a + di / n;
        if (channels.temperature) cycle.samples[i].temp_c = original[i].temp_c + dt / n;
    }
    return cycle;
}

std::vector<TrainingExample> build_examples(const Cycle& cycle, double horizon_s, std::size_t group) {
    const double period = cycle.meta.sampling_period_s;
    if (!(period > 0.0)) fail(ErrorKind::Config, "cycle '" + cycle.id + "' has no sampling period");
    double k_real = 0.0;
    if (!(horizon_s > 0.0) || !nearly_integer(horizon_s / period, k_real) || k_real < 1.0) {
        fail(ErrorKind::Config, "horizon " + csv::format_number(horizon_s) + " s is not a positive multiple of the " +
                                    csv::format_number(period) + " s sampling period");
    }
    const auto k = static_cast<std::size_t>(k_real);
    const auto& s = cycle.samples;
    std::vector<TrainingExample> out;
    if (s.size() <= k) {
        warn("cycle '" + cycle.id + "' is too short for a " + csv::format_number(horizon_s) + " s horizon");
        return out;
    }
    out.reserve(s.size() - k);
    for (std::size_t i = 0; i + k < s.size(); ++i) {
        TrainingExample ex;
        ex.voltage_v = s[i].voltage_v;
        ex.current_a = s[i].current_a;
        ex.temp_c = s[i].temp_c;
        ex.soc_now = s[i].soc;
        double isum = 0.0, tsum = 0.0;
        for (std::size_t j = i + 1; j <= i + k; ++j) {
            isum += s[j].current_a;
            tsum += s[j].temp_c;
        }
        ex.i_avg_a = isum / static_cast<double>(k);
        ex.t_avg_c = tsum / static_cast<double>(k);
        ex.horizon_s = horizon_s;
        ex.soc_future = s[i + k].soc;
        ex.group = group;
        out.push_back(ex);
    }
    return out;
}

model::NormStats compute_norm_stats(const std::vector<Cycle>& train_cycles, const physics::HorizonSet& horizons) {
    if (train_cycles.empty()) fail(ErrorKind::Config, "normalization needs at least one training cycle");
    constexpr double inf = std::numeric_limits<double>::infinity();
    model::NormStats st{{inf, -inf}, {inf, -inf}, {inf, -inf}, {0.0, horizons.max()}};
    for (const auto& c : train_cycles) {
        for (const auto& s : c.samples) {
            st.voltage.min = std::min(st.voltage.min, s.voltage_v);
            st.voltage.max = std::max(st.voltage.max, s.voltage_v);
            st.current.min = std::min(st.current.min, s.current_a);
            st.current.max = std::max(st.current.max, s.current_a);
            st.temperature.min = std::min(st.temperature.min, s.temp_c);
            st.temperature.max = std::max(st.temperature.max, s.temp_c);
        }
    }
    st.validate();
    return st;
}

Split split_dataset(const std::vector<Cycle>& cycles, const SplitPolicy& policy) {
    Split split;
    switch (policy.kind) {
        case SplitPolicy::Kind::SandiaCrate: {
            const bool any_rate = std::any_of(cycles.begin(), cycles.end(),
                                              [](const Cycle& c) { return c.meta.c_rate_discharge != 0.0; });
            if (!any_rate) fail(ErrorKind::Config, "sandia split needs discharge C-rate metadata on cycles");
            for (const auto& c : cycles) {
                if (std::abs(c.meta.c_rate_discharge - policy.train_discharge_c_rate) < 1e-6) {
                    split.train.push_back(c);
                } else {
                    split.test.push_back(c);
                }
            }
            if (split.train.empty()) fail(ErrorKind::Config, "sandia split found no training cycles at the requested C-rate");
            break;
        }
        case SplitPolicy::Kind::LgMixed: {
            std::vector<const Cycle*> mixed;
            std::vector<const Cycle*> driving;
            for (const auto& c : cycles) {
                (c.meta.profile.rfind("mixed", 0) == 0 ? mixed : driving).push_back(&c);
            }
            if (mixed.size() < 2) fail(ErrorKind::Config, "lg split needs at least two cycles tagged 'mixed*'");
            std::sort(mixed.begin(), mixed.end(), [](const Cycle* a, const Cycle* b) { return a->id < b->id; });
            const Cycle* held = mixed.back();
            if (!policy.held_out_mixed.empty()) {
                auto it = std::find_if(mixed.begin(), mixed.end(),
                                       [&](const Cycle* c) { return c->id == policy.held_out_mixed; });
                if (it == mixed.end()) fail(ErrorKind::Config, "held-out mixed cycle '" + policy.held_out_mixed + "' not found");
                held = *it;
            }
            for (const auto& c : cycles) {
                const bool is_mixed = c.meta.profile.rfind("mixed", 0) == 0;
                (is_mixed && &c != held ? split.train : split.test).push_back(c);
            }
            break;
        }
        case SplitPolicy::Kind::Explicit: {
            std::map<std::string, const Cycle*> by_id;
            for (const auto& c : cycles) by_id[c.id] = &c;
            std::set<std::string> seen;
            auto take = [&](const std::vector<std::string>& ids, std::vector<Cycle>& into) {
                for (const auto& id : ids) {
                    auto it = by_id.find(id);
                    if (it == by_id.end()) fail(ErrorKind::Config, "split lists unknown cycle '" + id + "'");
                    if (!seen.insert(id).second) fail(ErrorKind::Config, "cycle '" + id + "' listed on both sides");
                    into.push_back(*it->second);
                }
            };
            take(policy.train_ids, split.train);
            take(policy.test_ids, split.test);
            break;
        }
    }
    return split;
}

std::string canonical_csv(const Cycle& cycle) {
    std::string out = "time_s,voltage_v,current_a,temp_c,soc\n";
    for (const auto& s : cycle.samples) {
        out += csv::format_number(s.time_s) + ',' + csv::format_number(s.voltage_v) + ',' +
               csv::format_number(s.current_a) + ',' + csv::format_number(s.temp_c) + ',' + csv::format_number(s.soc) +
               '\n';
    }
    return out;
}

std::string meta_json(const Cycle& cycle) {
    const auto& m = cycle.meta;
    Json j;
    j["id"] = cycle.id;
    j["source"] = std::string(to_string(m.source));
    j["chemistry"] = m.chemistry;
    j["profile"] = m.profile;
    j["c_rate_charge"] = m.c_rate_charge;
    j["c_rate_discharge"] = m.c_rate_discharge;
    j["ambient_temp_c"] = m.ambient_temp_c;
    j["sampling_period_s"] = m.sampling_period_s;
    j["c_rated_ah"] = m.c_rated_ah;
    j["samples"] = cycle.samples.size();
    return j.dump(2) + "\n";
}

void write_canonical_cycle(const Cycle& cycle, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + dir.string() + ": " + ec.message());
    csv::write_file_atomic(dir / (cycle.id + ".csv"), canonical_csv(cycle));
    csv::write_file_atomic(dir / (cycle.id + ".json"), meta_json(cycle));
}

std::vector<Cycle> read_canonical_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) fail(ErrorKind::Io, "dataset directory " + dir.string() + " does not exist");
    std::vector<std::filesystem::path> csvs;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.path().extension() == ".csv" && std::filesystem::exists(entry.path().parent_path() /
                                                                          (entry.path().stem().string() + ".json"))) {
            csvs.push_back(entry.path());
        }
    }
    std::sort(csvs.begin(), csvs.end());
    if (csvs.empty()) fail(ErrorKind::Data, "dataset directory " + dir.string() + " holds no <id>.csv/<id>.json pairs");

    std::vector<Cycle> cycles;
    for (const auto& path : csvs) {
        const auto meta_path = path.parent_path() / (path.stem().string() + ".json");
        Json j;
        try {
            const auto lines = csv::read_lines(meta_path);
            std::string text;
            for (const auto& l : lines) text += l + "\n";
            j = Json::parse(text);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, meta_path.string() + ": " + e.what());
        }
        ParseOptions opts;
        opts.id = path.stem().string();
        try {
            opts.meta.source = source_from_string(j.value("source", "generic"));
            opts.meta.chemistry = j.value("chemistry", "");
            opts.meta.profile = j.value("profile", "");
            opts.meta.c_rate_charge = j.value("c_rate_charge", 0.0);
            opts.meta.c_rate_discharge = j.value("c_rate_discharge", 0.0);
            opts.meta.ambient_temp_c = j.value("ambient_temp_c", 25.0);
            opts.meta.sampling_period_s = j.value("sampling_period_s", 0.0);
            opts.meta.c_rated_ah = j.value("c_rated_ah", 0.0);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Parse, meta_path.string() + ": " + e.what());
        }
        auto cycle = parse_cycle_csv(path, CsvSchema::canonical(), opts);
        cycle.validate();
        cycles.push_back(std::move(cycle));
    }
    return cycles;
}

std::vector<double> all_currents(const std::vector<Cycle>& cycles) {
    std::vector<double> out;
    for (const auto& c : cycles) {
        for (const auto& s : c.samples) out.push_back(s.current_a);
    }
    return out;
}

}  // namespace socpinn::data
