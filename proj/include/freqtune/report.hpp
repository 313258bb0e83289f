#pragma once

#include "freqtune/simulator.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace freqtune
{

inline constexpr const char *kTrajectoryHeader =
    "step,process,rts,core_ghz,uncore_ghz,energy_j,reward,q_after,explored";

/// One line per trajectory row. `step` is 0 for the first measurement of a
/// tuned region and empty for untuned invocations; reward, q_after and
/// explored are only filled for tuner steps.
std::string trajectory_csv(const ExperimentResult &result, const FrequencyGrid &grid);

/// Visit counts and last stored energy for every grid cell of every tuner.
std::string heatmap_csv(const ExperimentResult &result, const FrequencyGrid &grid);

nlohmann::ordered_json summary_json(const ExperimentSpec &spec, const ExperimentResult &result);

struct SweepRow
{
    double value = 0.0;
    double savings = 0.0;                          ///< median over seeds
    std::optional<double> steps_to_convergence;    ///< median over seeds that converged
};

std::string sweep_csv(const std::vector<SweepRow> &rows);

/// Worst first-hit step over all (process, tuned region) pairs: the first
/// tuner step within one grid step of the region's optimum. Empty if any
/// tuner never gets there.
std::optional<std::uint64_t> steps_to_convergence(const ExperimentSpec &spec, const ExperimentResult &result);

struct RegionOracle
{
    RtsId rts;
    std::uint64_t from_iteration = 0;
    Optimum optimum;
    double default_energy_j = 0.0;
    double savings_bound = 0.0; ///< 1 - optimum / default, per invocation
};

/// Ground truth per region and per phase: exhaustive optimum and the best
/// attainable savings against the default state.
std::vector<RegionOracle> region_oracles(const ExperimentSpec &spec);

/// Writes through a temporary sibling and a rename. Throws IoFailure.
void write_file_atomic(const std::filesystem::path &path, const std::string &content);

std::string csv_field(const std::string &text);

} // namespace freqtune
