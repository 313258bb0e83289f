#include "freqtune/freqspace.hpp"

#include "freqtune/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

namespace freqtune
{

namespace
{

constexpr double kDuplicateTolGhz = 1e-9;

void check_levels(const std::vector<double> &levels, const char *what)
{
    if (levels.empty())
    {
        throw Error(ErrorCode::EmptyDimension, fmt::format("{} frequency list is empty", what));
    }
    for (std::size_t i = 0; i < levels.size(); ++i)
    {
        if (!std::isfinite(levels[i]) || levels[i] <= 0.0)
        {
            throw Error(ErrorCode::InvalidConfig,
                fmt::format("{} frequency {} is not a positive finite value", what, levels[i]));
        }
        if (i > 0 && !(levels[i] > levels[i - 1]))
        {
            throw Error(ErrorCode::InvalidConfig,
                fmt::format("{} frequencies must be strictly increasing", what));
        }
    }
}

std::vector<double> normalise_levels(std::vector<double> levels)
{
    std::erase_if(levels, [](double f) { return !std::isfinite(f) || f <= 0.0; });
    std::sort(levels.begin(), levels.end());
    auto last = std::unique(levels.begin(), levels.end(),
        [](double a, double b) { return std::abs(a - b) <= kDuplicateTolGhz; });
    levels.erase(last, levels.end());
    return levels;
}

} // namespace

FrequencyGrid::FrequencyGrid(std::vector<double> core_levels, std::vector<double> uncore_levels)
    : core_(std::move(core_levels)), uncore_(std::move(uncore_levels))
{
    check_levels(core_, "core");
    check_levels(uncore_, "uncore");
}

double FrequencyGrid::core_ghz(ConfigState s) const
{
    return core_.at(static_cast<std::size_t>(s.core_idx));
}

double FrequencyGrid::uncore_ghz(ConfigState s) const
{
    return uncore_.at(static_cast<std::size_t>(s.uncore_idx));
}

std::size_t FrequencyGrid::flat_index(ConfigState s) const
{
    return static_cast<std::size_t>(s.core_idx) * uncore_.size() + static_cast<std::size_t>(s.uncore_idx);
}

ConfigState FrequencyGrid::state_at(std::size_t flat) const
{
    return {static_cast<int>(flat / uncore_.size()), static_cast<int>(flat % uncore_.size())};
}

std::optional<ConfigState> FrequencyGrid::find(double core_ghz, double uncore_ghz, double tol_ghz) const
{
    auto locate = [tol_ghz](const std::vector<double> &levels, double f) -> std::optional<int> {
        for (std::size_t i = 0; i < levels.size(); ++i)
        {
            if (std::abs(levels[i] - f) <= tol_ghz)
            {
                return static_cast<int>(i);
            }
        }
        return std::nullopt;
    };
    auto c = locate(core_, core_ghz);
    auto u = locate(uncore_, uncore_ghz);
    if (!c || !u)
    {
        return std::nullopt;
    }
    return ConfigState{*c, *u};
}

FrequencyGrid make_grid(std::vector<double> core_ghz, std::vector<double> uncore_ghz)
{
    if (core_ghz.empty() || uncore_ghz.empty())
    {
        throw Error(ErrorCode::EmptyDimension, "frequency grid needs at least one core and one uncore level");
    }
    auto core = normalise_levels(std::move(core_ghz));
    auto uncore = normalise_levels(std::move(uncore_ghz));
    if (core.empty() || uncore.empty())
    {
        throw Error(ErrorCode::EmptyDimension, "no usable frequency left after deduplication");
    }
    return FrequencyGrid(std::move(core), std::move(uncore));
}

std::vector<double> frequency_range(double lo_ghz, double hi_ghz, double step_ghz)
{
    if (!(step_ghz > 0.0) || hi_ghz < lo_ghz)
    {
        throw Error(ErrorCode::InvalidConfig, "frequency range needs step > 0 and hi >= lo");
    }
    // Integer stepping keeps 1.2 + 7 * 0.1 from drifting away from 1.9.
    const auto n = static_cast<long>(std::floor((hi_ghz - lo_ghz) / step_ghz + 1e-6));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n + 1));
    for (long i = 0; i <= n; ++i)
    {
        const double f = lo_ghz + static_cast<double>(i) * step_ghz;
        out.push_back(std::round(f * 1e9) / 1e9);
    }
    return out;
}

FrequencyGrid default_grid()
{
    return make_grid(frequency_range(1.2, 2.5, 0.1), frequency_range(1.2, 3.0, 0.1));
}

bool is_valid_action(const FrequencyGrid &grid, ConfigState s, ActionDelta a)
{
    if (!is_unit_delta(a) || !grid.contains(s))
    {
        return false;
    }
    return grid.contains({s.core_idx + a.core_delta, s.uncore_idx + a.uncore_delta});
}

std::vector<ActionDelta> valid_actions(const FrequencyGrid &grid, ConfigState s)
{
    std::vector<ActionDelta> out;
    out.reserve(kActionCount);
    for (const auto a : kActionOrder)
    {
        if (is_valid_action(grid, s, a))
        {
            out.push_back(a);
        }
    }
    return out;
}

ConfigState apply_action(const FrequencyGrid &grid, ConfigState s, ActionDelta a)
{
    if (!is_valid_action(grid, s, a))
    {
        throw Error(ErrorCode::InvalidAction,
            fmt::format("action ({},{}) from state ({},{}) leaves the {}x{} grid", a.core_delta,
                a.uncore_delta, s.core_idx, s.uncore_idx, grid.core_count(), grid.uncore_count()));
    }
    return {s.core_idx + a.core_delta, s.uncore_idx + a.uncore_delta};
}

int grid_distance(ConfigState a, ConfigState b)
{
    return std::max(std::abs(a.core_idx - b.core_idx), std::abs(a.uncore_idx - b.uncore_idx));
}

} // namespace freqtune
