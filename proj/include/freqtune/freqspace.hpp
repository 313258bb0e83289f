#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace freqtune
{

/// A point on the core x uncore lattice. The learner works on indices only;
/// frequencies in GHz show up at I/O and in the energy model.
struct ConfigState
{
    int core_idx = 0;
    int uncore_idx = 0;

    auto operator<=>(const ConfigState &) const = default;
};

/// One of the nine moves of the 3x3 action matrix.
struct ActionDelta
{
    int core_delta = 0;
    int uncore_delta = 0;

    auto operator<=>(const ActionDelta &) const = default;

    constexpr ActionDelta negated() const
    {
        return {-core_delta, -uncore_delta};
    }
    constexpr bool is_stay() const
    {
        return core_delta == 0 && uncore_delta == 0;
    }
};

inline constexpr ActionDelta kStay{0, 0};
inline constexpr std::size_t kActionCount = 9;

/// Row-major over (core_delta, uncore_delta) in {-1,0,+1}^2. This is also the
/// greedy tie-break order: the first maximum wins.
inline constexpr std::array<ActionDelta, kActionCount> kActionOrder = {{
    {-1, -1}, {-1, 0}, {-1, 1},
    {0, -1},  {0, 0},  {0, 1},
    {1, -1},  {1, 0},  {1, 1},
}};

constexpr std::size_t action_index(ActionDelta a)
{
    return static_cast<std::size_t>((a.core_delta + 1) * 3 + (a.uncore_delta + 1));
}

constexpr bool is_unit_delta(ActionDelta a)
{
    return a.core_delta >= -1 && a.core_delta <= 1 && a.uncore_delta >= -1 && a.uncore_delta <= 1;
}

class FrequencyGrid
{
public:
    /// Levels must be non-empty, finite, positive and strictly increasing.
    FrequencyGrid(std::vector<double> core_levels, std::vector<double> uncore_levels);

    std::span<const double> core_levels() const
    {
        return core_;
    }
    std::span<const double> uncore_levels() const
    {
        return uncore_;
    }

    int core_count() const
    {
        return static_cast<int>(core_.size());
    }
    int uncore_count() const
    {
        return static_cast<int>(uncore_.size());
    }
    std::size_t size() const
    {
        return core_.size() * uncore_.size();
    }

    bool contains(ConfigState s) const
    {
        return s.core_idx >= 0 && s.core_idx < core_count() && s.uncore_idx >= 0 &&
               s.uncore_idx < uncore_count();
    }

    double core_ghz(ConfigState s) const;
    double uncore_ghz(ConfigState s) const;

    std::size_t flat_index(ConfigState s) const;
    ConfigState state_at(std::size_t flat) const;

    /// Grid point whose levels match the given frequencies within `tol_ghz`.
    std::optional<ConfigState> find(double core_ghz, double uncore_ghz, double tol_ghz = 1e-6) const;

    bool operator==(const FrequencyGrid &) const = default;

private:
    std::vector<double> core_;
    std::vector<double> uncore_;
};

/// Sorts ascending and drops duplicates (and non-positive / non-finite
/// entries). Throws EmptyDimension if a dimension ends up empty.
FrequencyGrid make_grid(std::vector<double> core_ghz, std::vector<double> uncore_ghz);

/// 1.2-2.5 GHz core by 0.1, 1.2-3.0 GHz uncore by 0.1 (14 x 19).
FrequencyGrid default_grid();

/// Levels lo, lo+step, ..., hi computed from integer multiples of `step`.
std::vector<double> frequency_range(double lo_ghz, double hi_ghz, double step_ghz);

bool is_valid_action(const FrequencyGrid &grid, ConfigState s, ActionDelta a);

/// Actions that keep both indices in bounds, in kActionOrder. Out-of-grid
/// moves are masked, never clamped.
std::vector<ActionDelta> valid_actions(const FrequencyGrid &grid, ConfigState s);

/// Throws InvalidAction if the move leaves the grid.
ConfigState apply_action(const FrequencyGrid &grid, ConfigState s, ActionDelta a);

/// Chebyshev distance in grid steps; 1 means "one diagonal/axis move away".
int grid_distance(ConfigState a, ConfigState b);

} // namespace freqtune
