#pragma once

#include "freqtune/freqspace.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace freqtune
{

using Rng = std::mt19937_64;

/// Energy of one region invocation, taken while running at `state`.
struct EnergySample
{
    double joules = 0.0;
    double duration_ms = 1.0;
    ConfigState state;

    bool operator==(const EnergySample &) const = default;
};

/// P(c, u) = base_w + curv_core (c - c*)^2 + curv_uncore (u - u*)^2, GHz in, W out.
struct BowlSurface
{
    double min_core_ghz = 0.0;
    double min_uncore_ghz = 0.0;
    double curv_core = 1.0;
    double curv_uncore = 1.0;
    double base_w = 1.0;

    bool operator==(const BowlSurface &) const = default;
};

/// powers_w[core_idx][uncore_idx] in watts.
struct TableSurface
{
    std::vector<std::vector<double>> powers_w;

    bool operator==(const TableSurface &) const = default;
};

using PowerShape = std::variant<BowlSurface, TableSurface>;

/// Per-invocation runtime. `base_ms` is the duration at the highest core
/// level; `sensitivity` 0 keeps it constant, 1 scales it with 1/f_core.
struct RuntimeModel
{
    double base_ms = 1000.0;
    double sensitivity = 0.0;

    bool operator==(const RuntimeModel &) const = default;
};

struct EnergySurface
{
    PowerShape shape;
    RuntimeModel runtime;

    bool operator==(const EnergySurface &) const = default;
};

/// Throws InvalidConfig if the surface does not fit the grid or is not
/// strictly positive everywhere on it.
void validate_surface(const EnergySurface &surface, const FrequencyGrid &grid);

/// Noise- and offset-free power at `s`.
double surface_power(const EnergySurface &surface, ConfigState s, const FrequencyGrid &grid);

double invocation_duration_ms(const EnergySurface &surface, ConfigState s, const FrequencyGrid &grid);

/// (power + offset) * seconds, no noise.
double noiseless_energy_j(
    const EnergySurface &surface, ConfigState s, const FrequencyGrid &grid, double static_offset_w);

struct MeterConfig
{
    double static_offset_w = 70.0;
    double noise_sigma_rel = 0.005;
    std::uint64_t seed = 0;

    bool operator==(const MeterConfig &) const = default;
};

void validate_meter(const MeterConfig &cfg);

/// Simulated energy counter: static platform offset plus multiplicative
/// Gaussian noise. Owns its random stream.
class EnergyMeter
{
public:
    explicit EnergyMeter(MeterConfig cfg);

    const MeterConfig &config() const
    {
        return cfg_;
    }

    EnergySample measure(const EnergySurface &surface, ConfigState s, const FrequencyGrid &grid);

    Rng &rng()
    {
        return rng_;
    }
    const Rng &rng() const
    {
        return rng_;
    }

private:
    MeterConfig cfg_;
    Rng rng_;
};

struct Optimum
{
    ConfigState state;
    double joules = 0.0;
};

/// Exhaustive scan for the minimum noiseless energy; ties go to the lowest
/// core index, then the lowest uncore index.
Optimum optimum_state(const EnergySurface &surface, const FrequencyGrid &grid, double static_offset_w = 70.0);

/// Opaque, versioned text form of an engine state ("mt19937_64/1:...").
std::string rng_to_token(const Rng &rng);
/// Throws CorruptSnapshot on a malformed or unknown token.
Rng rng_from_token(const std::string &token);

} // namespace freqtune
