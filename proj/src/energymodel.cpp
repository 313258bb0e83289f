#include "freqtune/energymodel.hpp"

#include "freqtune/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace freqtune
{

namespace
{

constexpr std::string_view kRngTokenPrefix = "mt19937_64/1:";

struct PowerAt
{
    const FrequencyGrid &grid;
    ConfigState s;

    double operator()(const BowlSurface &b) const
    {
        const double dc = grid.core_ghz(s) - b.min_core_ghz;
        const double du = grid.uncore_ghz(s) - b.min_uncore_ghz;
        return b.base_w + b.curv_core * dc * dc + b.curv_uncore * du * du;
    }

    double operator()(const TableSurface &t) const
    {
        return t.powers_w.at(static_cast<std::size_t>(s.core_idx)).at(static_cast<std::size_t>(s.uncore_idx));
    }
};

} // namespace

void validate_surface(const EnergySurface &surface, const FrequencyGrid &grid)
{
    if (const auto *bowl = std::get_if<BowlSurface>(&surface.shape))
    {
        if (!(bowl->curv_core > 0.0) || !(bowl->curv_uncore > 0.0))
        {
            throw Error(ErrorCode::InvalidConfig, "bowl curvatures must be positive");
        }
        if (!(bowl->base_w > 0.0))
        {
            throw Error(ErrorCode::InvalidConfig, "bowl base power must be positive");
        }
    }
    else
    {
        const auto &table = std::get<TableSurface>(surface.shape);
        if (table.powers_w.size() != static_cast<std::size_t>(grid.core_count()))
        {
            throw Error(ErrorCode::InvalidConfig,
                fmt::format("power table has {} core rows, grid has {}", table.powers_w.size(),
                    grid.core_count()));
        }
        for (const auto &row : table.powers_w)
        {
            if (row.size() != static_cast<std::size_t>(grid.uncore_count()))
            {
                throw Error(ErrorCode::InvalidConfig,
                    fmt::format("power table row has {} uncore entries, grid has {}", row.size(),
                        grid.uncore_count()));
            }
            for (double p : row)
            {
                if (!std::isfinite(p) || !(p > 0.0))
                {
                    throw Error(ErrorCode::InvalidConfig, "power table entries must be positive");
                }
            }
        }
    }
    if (!(surface.runtime.base_ms > 0.0) || !std::isfinite(surface.runtime.base_ms))
    {
        throw Error(ErrorCode::InvalidConfig, "region duration must be positive");
    }
    if (surface.runtime.sensitivity < 0.0 || !std::isfinite(surface.runtime.sensitivity))
    {
        throw Error(ErrorCode::InvalidConfig, "runtime sensitivity must be non-negative");
    }
}

double surface_power(const EnergySurface &surface, ConfigState s, const FrequencyGrid &grid)
{
    return std::visit(PowerAt{grid, s}, surface.shape);
}

double invocation_duration_ms(const EnergySurface &surface, ConfigState s, const FrequencyGrid &grid)
{
    const auto &rt = surface.runtime;
    if (rt.sensitivity == 0.0)
    {
        return rt.base_ms;
    }
    const double f_max = grid.core_levels().back();
    return rt.base_ms * (1.0 + rt.sensitivity * (f_max / grid.core_ghz(s) - 1.0));
}

double noiseless_energy_j(
    const EnergySurface &surface, ConfigState s, const FrequencyGrid &grid, double static_offset_w)
{
    return (surface_power(surface, s, grid) + static_offset_w) * invocation_duration_ms(surface, s, grid) / 1000.0;
}

void validate_meter(const MeterConfig &cfg)
{
    if (!(cfg.static_offset_w >= 0.0) || !std::isfinite(cfg.static_offset_w))
    {
        throw Error(ErrorCode::InvalidConfig, "static offset must be >= 0");
    }
    if (!(cfg.noise_sigma_rel >= 0.0) || !std::isfinite(cfg.noise_sigma_rel))
    {
        throw Error(ErrorCode::InvalidConfig, "noise sigma must be >= 0");
    }
}

EnergyMeter::EnergyMeter(MeterConfig cfg) : cfg_(cfg), rng_(cfg.seed)
{
    validate_meter(cfg_);
}

EnergySample EnergyMeter::measure(const EnergySurface &surface, ConfigState s, const FrequencyGrid &grid)
{
    const double duration = invocation_duration_ms(surface, s, grid);
    double joules = (surface_power(surface, s, grid) + cfg_.static_offset_w) * duration / 1000.0;
    if (cfg_.noise_sigma_rel > 0.0)
    {
        // Fresh distribution per draw: no cached second variate, so the
        // engine state alone describes the stream.
        std::normal_distribution<double> noise(0.0, cfg_.noise_sigma_rel);
        joules *= 1.0 + noise(rng_);
    }
    return {std::max(joules, 0.0), duration, s};
}

Optimum optimum_state(const EnergySurface &surface, const FrequencyGrid &grid, double static_offset_w)
{
    Optimum best{{0, 0}, noiseless_energy_j(surface, {0, 0}, grid, static_offset_w)};
    for (int c = 0; c < grid.core_count(); ++c)
    {
        for (int u = 0; u < grid.uncore_count(); ++u)
        {
            const double e = noiseless_energy_j(surface, {c, u}, grid, static_offset_w);
            if (e < best.joules)
            {
                best = {{c, u}, e};
            }
        }
    }
    return best;
}

std::string rng_to_token(const Rng &rng)
{
    std::ostringstream os;
    os << rng;
    return std::string(kRngTokenPrefix) + os.str();
}

Rng rng_from_token(const std::string &token)
{
    if (!token.starts_with(kRngTokenPrefix))
    {
        throw Error(ErrorCode::CorruptSnapshot, "unknown RNG state token");
    }
    std::istringstream is(token.substr(kRngTokenPrefix.size()));
    Rng rng;
    is >> rng;
    if (is.fail())
    {
        throw Error(ErrorCode::CorruptSnapshot, "malformed RNG state token");
    }
    return rng;
}

} // namespace freqtune
