#pragma once

#include "freqtune/experiment.hpp"
#include "freqtune/learner.hpp"
#include "freqtune/persistence.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace freqtune
{

enum class RowKind
{
    Untuned, ///< leaf invocation not covered by any tuned region
    Initial, ///< first measurement of a tuned region (E_0)
    Step,    ///< tuner step with update
};

/// One energy-accounting unit. Every joule the process consumes appears in
/// exactly one row: leaf energy is charged to the innermost tuned region
/// around it, or gets its own Untuned row.
struct TrajectoryRow
{
    std::size_t process = 0;
    std::uint64_t iteration = 0;
    RtsId rts;
    RowKind kind = RowKind::Untuned;
    ConfigState state; ///< where the energy was measured
    double energy_j = 0.0;
    double duration_ms = 0.0;
    std::optional<StepRecord> record;

    bool operator==(const TrajectoryRow &) const = default;
};

struct ProcessResult
{
    std::size_t process_index = 0;
    std::uint64_t first_iteration = 0;
    std::vector<TrajectoryRow> rows;
    double energy_j = 0.0;
    double time_ms = 0.0;
    ProcessTuners tuners; ///< state after the run, ready for a snapshot

    bool operator==(const ProcessResult &) const = default;
};

struct FinalState
{
    std::size_t process = 0;
    RtsId rts;
    ConfigState modal; ///< most frequent state over the last 20% of measurements
    ConfigState last;  ///< where the tuner would run next
};

struct ExperimentResult
{
    std::vector<ProcessResult> processes;
    double tuned_energy_j = 0.0;
    double baseline_energy_j = 0.0;
    double savings_fraction = 0.0;
    double tuned_time_ms = 0.0;
    double baseline_time_ms = 0.0;
    double runtime_overhead_fraction = 0.0;
    std::vector<FinalState> final_states;
};

struct RunOptions
{
    /// Per-process starting point (e.g. from load_snapshot); fresh if empty.
    std::vector<ProcessTuners> resume;
    /// Worker threads; results do not depend on this.
    std::size_t workers = 1;
};

/// Runs one logical process: replays the region pattern for spec.iterations
/// iterations starting at `start.iterations_completed`.
ProcessResult run_process(const ExperimentSpec &spec, std::size_t process_index, ProcessTuners start);
ProcessResult run_process(const ExperimentSpec &spec, std::size_t process_index);

ExperimentResult run_experiment(const ExperimentSpec &spec, const RunOptions &options = {});

/// Noiseless energy of one process with every region pinned at the default
/// state for spec.iterations iterations starting at `first_iteration`.
double baseline_energy(const ExperimentSpec &spec, std::uint64_t first_iteration = 0);
double baseline_time_ms(const ExperimentSpec &spec, std::uint64_t first_iteration = 0);

/// Surface of every region in effect at `iteration` after phase changes.
std::vector<EnergySurface> surfaces_at(const ExperimentSpec &spec, std::uint64_t iteration);

/// Runs a spec with exactly one phase change that moves its region's optimum
/// by at least three grid steps. Throws InvalidConfig otherwise.
ExperimentResult phase_change_response(const ExperimentSpec &spec, const RunOptions &options = {});

/// Most frequent measured state of `rts` over the trailing `tail_fraction`
/// of its tuned rows; ties go to the smaller state.
std::optional<ConfigState> modal_state(std::span<const TrajectoryRow> rows, const RtsId &rts, double tail_fraction = 0.2);

/// First tuner step whose resulting state lies within `radius` grid steps of
/// `target`, or empty if it never happens.
std::optional<std::uint64_t> first_step_within(
    std::span<const TrajectoryRow> rows, const RtsId &rts, ConfigState target, int radius = 1);

} // namespace freqtune
