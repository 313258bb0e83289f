#pragma once

#include "freqtune/experiment.hpp"
#include "freqtune/learner.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

namespace freqtune
{

struct Tuner
{
    QTable table;
    TunerState state;

    bool operator==(const Tuner &) const = default;
};

/// Everything one logical process carries between runs: its tuners (one per
/// runtime situation), both random streams and how far it got.
struct ProcessTuners
{
    std::size_t process_index = 0;
    std::uint64_t iterations_completed = 0;
    std::map<RtsId, Tuner> tuners;
    Rng learner_rng;
    Rng meter_rng;

    bool operator==(const ProcessTuners &) const = default;
};

inline constexpr int kSnapshotFormatVersion = 1;

struct Snapshot
{
    int format_version = kSnapshotFormatVersion;
    FrequencyGrid grid = default_grid();
    LearnerConfig learner;
    ProcessTuners process;
    std::string created_by = "freqtune";

    bool operator==(const Snapshot &) const = default;
};

/// Empty tuner set with both streams seeded from the spec.
ProcessTuners fresh_tuners(const ExperimentSpec &spec, std::size_t process_index);

Snapshot make_snapshot(const ExperimentSpec &spec, const ProcessTuners &process);

nlohmann::ordered_json qtable_to_json(const QTable &table);
QTable qtable_from_json(const nlohmann::json &j);
nlohmann::ordered_json snapshot_to_json(const Snapshot &snapshot);
/// Throws CorruptSnapshot on schema violations or unsupported versions.
Snapshot snapshot_from_json(const nlohmann::json &j);

/// Writes to a temporary sibling and renames it over `path`. Throws IoFailure.
void save_snapshot(const Snapshot &snapshot, const std::filesystem::path &path);
/// Throws IoFailure if unreadable, CorruptSnapshot if malformed.
Snapshot read_snapshot(const std::filesystem::path &path);

/// Restores the tuners of one process according to `mode`:
///   Discard        - fresh tuners, the file is not read;
///   Continue       - tables, tuner states, counters and RNG streams verbatim;
///   ResetIteration - tables kept, tuner states back at spec.start with step
///                    0, RNG streams reseeded from the spec.
/// Throws IncompatibleSnapshot if grid or learner config differ from `spec`.
ProcessTuners load_snapshot(
    const std::filesystem::path &path, RestartMode mode, const ExperimentSpec &spec, std::size_t process_index);

/// "run.json" -> "run-p3.json".
std::filesystem::path process_snapshot_path(const std::filesystem::path &base, std::size_t process_index);

} // namespace freqtune
