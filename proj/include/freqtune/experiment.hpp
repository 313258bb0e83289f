#pragma once

#include "freqtune/calltree.hpp"
#include "freqtune/energymodel.hpp"
#include "freqtune/freqspace.hpp"
#include "freqtune/learner.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace freqtune
{

/// What happens to stored tuner state when an application starts again.
enum class RestartMode
{
    Discard,        ///< evaluate from scratch, ignore stored state
    Continue,       ///< pick up the previous run exactly where it stopped
    ResetIteration, ///< restart from the initial state, keep learned values
};

const char *to_string(RestartMode mode) noexcept;
/// Accepts "discard", "continue", "reset". Throws InvalidConfig.
RestartMode parse_restart_mode(std::string_view text);

/// One simulated region: its call path (leaf is the region itself) and the
/// power/runtime surface it exhibits.
struct RegionSpec
{
    RtsId path;
    EnergySurface surface;

    bool operator==(const RegionSpec &) const = default;
};

/// Replaces the power shape of `region` from iteration `iteration` on.
struct PhaseChange
{
    std::uint64_t iteration = 0;
    std::size_t region = 0;
    PowerShape shape;

    bool operator==(const PhaseChange &) const = default;
};

struct ExperimentSpec
{
    FrequencyGrid grid = default_grid();
    LearnerConfig learner;
    MeterConfig meter;
    RestartMode restart_mode = RestartMode::Discard;
    std::size_t process_count = 1;
    std::uint64_t iterations = 1;
    double candidate_threshold_ms = 100.0;
    std::vector<RegionSpec> regions;
    ConfigState start;
    ConfigState default_state;
    std::vector<PhaseChange> phase_changes;
    std::uint64_t master_seed = 0;

    bool operator==(const ExperimentSpec &) const = default;
};

/// Throws InvalidConfig describing the first problem found.
void validate_spec(const ExperimentSpec &spec);

/// Parses and validates the experiment JSON. Throws InvalidConfig.
ExperimentSpec spec_from_json(const nlohmann::json &j);
nlohmann::ordered_json spec_to_json(const ExperimentSpec &spec);
ExperimentSpec load_spec(const std::filesystem::path &path);

nlohmann::ordered_json grid_to_json(const FrequencyGrid &grid);
FrequencyGrid grid_from_json(const nlohmann::json &j);
nlohmann::ordered_json learner_to_json(const LearnerConfig &cfg);
LearnerConfig learner_from_json(const nlohmann::json &j);
nlohmann::ordered_json shape_to_json(const PowerShape &shape);
PowerShape shape_from_json(const nlohmann::json &j);

} // namespace freqtune

namespace freqtune
{

/// Seed of process `p`: a splitmix64 step over master_seed mixed with p, so
/// adding processes never changes the streams of existing ones.
std::uint64_t process_seed(std::uint64_t master_seed, std::size_t process_index);
std::uint64_t learner_stream_seed(std::uint64_t master_seed, std::size_t process_index);
std::uint64_t meter_stream_seed(std::uint64_t master_seed, std::size_t process_index);

} // namespace freqtune
