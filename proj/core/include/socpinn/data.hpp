#pragma once

#include "socpinn/model.hpp"
#include "socpinn/physics.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace socpinn::data {

enum class Source { Sandia, Lg, Synthetic, Generic };

std::string_view to_string(Source source);
Source source_from_string(std::string_view name);

/// One time step of a cycle. Current is negative while discharging.
struct Sample {
    double time_s = 0.0;
    double voltage_v = 0.0;
    double current_a = 0.0;
    double temp_c = 0.0;
    double soc = 0.0;
};

struct CycleMeta {
    Source source = Source::Generic;
    std::string chemistry;
    /// Free-form load pattern tag, e.g. "cc", "mixed3", "udds".
    std::string profile;
    double c_rate_charge = 0.0;
    double c_rate_discharge = 0.0;
    double ambient_temp_c = 25.0;
    double sampling_period_s = 0.0;
    double c_rated_ah = 0.0;
};

struct Cycle {
    std::string id;
    std::vector<Sample> samples;
    CycleMeta meta;

    /// Throws Error{Data} unless there are >= 2 samples, time is strictly
    /// increasing and the sampling period is positive.
    void validate() const;
};

/// Branch-1 inputs and target at time t plus the branch-2 window (t, t + horizon].
struct TrainingExample {
    double voltage_v = 0.0;
    double current_a = 0.0;
    double temp_c = 0.0;
    double soc_now = 0.0;
    double i_avg_a = 0.0;
    double t_avg_c = 0.0;
    double horizon_s = 0.0;
    double soc_future = 0.0;
    /// Index of the source cycle; used for cycle-stratified validation splits.
    std::size_t group = 0;
};

enum class SchemaKind { Sandia, Lg, Generic };

struct ColumnMapping {
    std::string time_s;
    std::string voltage_v;
    std::string current_a;
    std::string temp_c;
    std::optional<std::string> soc;
    std::optional<std::string> capacity_ah;
};

struct CsvSchema {
    SchemaKind kind = SchemaKind::Generic;
    ColumnMapping columns;

    /// Battery-archive style export: "Test_Time (s)", "Voltage (V)", ...
    static CsvSchema sandia();
    /// McMaster LG HG2 export: "Prog Time", "Voltage", "Current", "Temperature", "Capacity".
    static CsvSchema lg();
    static CsvSchema generic(ColumnMapping columns);
    /// time_s,voltage_v,current_a,temp_c,soc
    static CsvSchema canonical();
};

SchemaKind schema_kind_from_string(std::string_view name);

struct ParseOptions {
    /// Defaults to the file stem.
    std::string id;
    /// Template for the cycle metadata; sampling period is measured from the
    /// file when left at zero, source is taken from the schema.
    CycleMeta meta;
    /// Anchor used when SoC must be derived from current or capacity.
    std::optional<double> initial_soc;
};

/**
 * Reads one cycle. Lines before the header (instrument preambles) are
 * skipped. Rows with unparsable or non-finite values are dropped and
 * reported through `warn` with their line numbers. Without a SoC column the
 * SoC is derived from the capacity column or by Coulomb integration.
 */
Cycle parse_cycle_csv(const std::filesystem::path& path, const CsvSchema& schema, const ParseOptions& options = {});

/**
 * soc(t) = soc(t0) + integral(I) / (3600 * capacity), trapezoidal rule.
 *
 * When `initial_soc` is empty the anchor comes from the first non-zero
 * current: a discharge starts full (1.0), a charge starts empty (0.0). The
 * result is clipped to [0, 1]; excursions beyond 0.02 trigger a warning.
 */
Cycle derive_soc(Cycle cycle, double c_rated_ah, std::optional<double> initial_soc = std::nullopt);

struct Channels {
    bool voltage = true;
    bool current = true;
    bool temperature = true;
};

/// Trailing mean over samples with time in (t - window_s, t]. SoC and time
/// are untouched; the first samples average whatever history exists.
Cycle moving_average(Cycle cycle, double window_s, Channels channels = {});

/// Stride-1 windows: one example per index i with i + k in range, where
/// k = horizon_s / sampling_period_s must be a positive integer.
std::vector<TrainingExample> build_examples(const Cycle& cycle, double horizon_s, std::size_t group = 0);

/// Min/max of V, I, T over every training sample; horizon range [0, max(horizons)].
model::NormStats compute_norm_stats(const std::vector<Cycle>& train_cycles, const physics::HorizonSet& horizons);

struct SplitPolicy {
    enum class Kind { SandiaCrate, LgMixed, Explicit };

    Kind kind = Kind::Explicit;
    /// SandiaCrate: discharge C-rate (signed) that goes to training.
    double train_discharge_c_rate = -1.0;
    /// LgMixed: id of the mixed cycle held out for test; empty picks the
    /// last mixed cycle by id.
    std::string held_out_mixed;
    /// Explicit: cycle ids for each side.
    std::vector<std::string> train_ids;
    std::vector<std::string> test_ids;
};

struct Split {
    std::vector<Cycle> train;
    std::vector<Cycle> test;
};

Split split_dataset(const std::vector<Cycle>& cycles, const SplitPolicy& policy);

/// Canonical dump: <dir>/<id>.csv (time_s,voltage_v,current_a,temp_c,soc)
/// and <dir>/<id>.json holding the metadata.
void write_canonical_cycle(const Cycle& cycle, const std::filesystem::path& dir);
std::string canonical_csv(const Cycle& cycle);
std::string meta_json(const Cycle& cycle);

/// Reads every <id>.csv with a matching <id>.json sidecar, ordered by id.
std::vector<Cycle> read_canonical_dataset(const std::filesystem::path& dir);

/// Every sample's current, in cycle order.
std::vector<double> all_currents(const std::vector<Cycle>& cycles);

}  // namespace socpinn::data
