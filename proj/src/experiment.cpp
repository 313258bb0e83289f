#include "freqtune/experiment.hpp"

#include "freqtune/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace freqtune
{

using nlohmann::json;
using nlohmann::ordered_json;

namespace
{

[[noreturn]] void config_error(const std::string &message)
{
    throw Error(ErrorCode::InvalidConfig, message);
}

const json &require(const json &j, const char *key, const char *where)
{
    if (!j.is_object() || !j.contains(key))
    {
        config_error(fmt::format("{}: missing '{}'", where, key));
    }
    return j.at(key);
}

double number(const json &j, const char *key, const char *where)
{
    const auto &v = require(j, key, where);
    if (!v.is_number())
    {
        config_error(fmt::format("{}: '{}' must be a number", where, key));
    }
    return v.get<double>();
}

double number_or(const json &j, const char *key, double fallback, const char *where)
{
    return j.contains(key) ? number(j, key, where) : fallback;
}

std::uint64_t count_or(const json &j, const char *key, std::uint64_t fallback, const char *where)
{
    if (!j.contains(key))
    {
        return fallback;
    }
    const auto &v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    {
        config_error(fmt::format("{}: '{}' must be a non-negative integer", where, key));
    }
    return v.get<std::uint64_t>();
}

std::vector<double> number_list(const json &j, const char *key, const char *where)
{
    const auto &v = require(j, key, where);
    if (!v.is_array())
    {
        config_error(fmt::format("{}: '{}' must be an array of numbers", where, key));
    }
    std::vector<double> out;
    for (const auto &x : v)
    {
        if (!x.is_number())
        {
            config_error(fmt::format("{}: '{}' must be an array of numbers", where, key));
        }
        out.push_back(x.get<double>());
    }
    return out;
}

ConfigState state_from_json(const json &j, const FrequencyGrid &grid, const char *where)
{
    const double core = number(j, "core_ghz", where);
    const double uncore = number(j, "uncore_ghz", where);
    const auto s = grid.find(core, uncore);
    if (!s)
    {
        config_error(fmt::format("{}: ({} GHz, {} GHz) is not a grid point", where, core, uncore));
    }
    return *s;
}

ordered_json state_to_json(ConfigState s, const FrequencyGrid &grid)
{
    ordered_json j;
    j["core_ghz"] = grid.core_ghz(s);
    j["uncore_ghz"] = grid.uncore_ghz(s);
    return j;
}

} // namespace

const char *to_string(RestartMode mode) noexcept
{
    switch (mode)
    {
    case RestartMode::Discard:
        return "discard";
    case RestartMode::Continue:
        return "continue";
    case RestartMode::ResetIteration:
        return "reset";
    }
    return "discard";
}

RestartMode parse_restart_mode(std::string_view text)
{
    if (text == "discard")
    {
        return RestartMode::Discard;
    }
    if (text == "continue")
    {
        return RestartMode::Continue;
    }
    if (text == "reset")
    {
        return RestartMode::ResetIteration;
    }
    config_error(fmt::format("unknown restart mode '{}' (expected discard, continue or reset)", text));
}

ordered_json grid_to_json(const FrequencyGrid &grid)
{
    ordered_json j;
    j["core_ghz"] = std::vector<double>(grid.core_levels().begin(), grid.core_levels().end());
    j["uncore_ghz"] = std::vector<double>(grid.uncore_levels().begin(), grid.uncore_levels().end());
    return j;
}

FrequencyGrid grid_from_json(const json &j)
{
    return make_grid(number_list(j, "core_ghz", "grid"), number_list(j, "uncore_ghz", "grid"));
}

ordered_json learner_to_json(const LearnerConfig &cfg)
{
    ordered_json j;
    j["alpha"] = cfg.alpha;
    j["gamma"] = cfg.gamma;
    j["epsilon"] = cfg.epsilon;
    j["stay_bias"] = cfg.stay_bias;
    return j;
}

LearnerConfig learner_from_json(const json &j)
{
    LearnerConfig cfg;
    cfg.alpha = number_or(j, "alpha", cfg.alpha, "learner");
    cfg.gamma = number_or(j, "gamma", cfg.gamma, "learner");
    cfg.epsilon = number_or(j, "epsilon", cfg.epsilon, "learner");
    cfg.stay_bias = number_or(j, "stay_bias", cfg.stay_bias, "learner");
    return cfg;
}

ordered_json shape_to_json(const PowerShape &shape)
{
    ordered_json j;
    if (const auto *bowl = std::get_if<BowlSurface>(&shape))
    {
        j["kind"] = "bowl";
        j["min_core_ghz"] = bowl->min_core_ghz;
        j["min_uncore_ghz"] = bowl->min_uncore_ghz;
        j["curv_core"] = bowl->curv_core;
        j["curv_uncore"] = bowl->curv_uncore;
        j["base_w"] = bowl->base_w;
    }
    else
    {
        j["kind"] = "table";
        j["powers_w"] = std::get<TableSurface>(shape).powers_w;
    }
    return j;
}

PowerShape shape_from_json(const json &j)
{
    const auto &kind = require(j, "kind", "surface");
    if (kind == "bowl")
    {
        BowlSurface b;
        b.min_core_ghz = number(j, "min_core_ghz", "surface");
        b.min_uncore_ghz = number(j, "min_uncore_ghz", "surface");
        b.curv_core = number(j, "curv_core", "surface");
        b.curv_uncore = number(j, "curv_uncore", "surface");
        b.base_w = number(j, "base_w", "surface");
        return b;
    }
    if (kind == "table")
    {
        const auto &rows = require(j, "powers_w", "surface");
        if (!rows.is_array())
        {
            config_error("surface: 'powers_w' must be an array of arrays");
        }
        TableSurface t;
        for (const auto &row : rows)
        {
            if (!row.is_array())
            {
                config_error("surface: 'powers_w' must be an array of arrays");
            }
            std::vector<double> r;
            for (const auto &p : row)
            {
                if (!p.is_number())
                {
                    config_error("surface: power table entries must be numbers");
                }
                r.push_back(p.get<double>());
            }
            t.powers_w.push_back(std::move(r));
        }
        return t;
    }
    config_error(fmt::format("surface: unknown kind {}", kind.dump()));
}

void validate_spec(const ExperimentSpec &spec)
{
    validate_learner(spec.learner);
    validate_meter(spec.meter);
    if (spec.process_count < 1)
    {
        config_error("processes must be >= 1");
    }
    if (spec.iterations < 1)
    {
        config_error("iterations must be >= 1");
    }
    if (!(spec.candidate_threshold_ms >= 0.0))
    {
        config_error("candidate_threshold_ms must be >= 0");
    }
    if (!spec.grid.contains(spec.start))
    {
        config_error("start state outside the grid");
    }
    if (!spec.grid.contains(spec.default_state))
    {
        config_error("default state outside the grid");
    }
    if (spec.regions.empty())
    {
        config_error("at least one region is required");
    }
    std::set<RtsId> seen;
    for (const auto &r : spec.regions)
    {
        const auto segs = r.path.segments();
        if (segs.size() < 2 || segs.front().kind != NodeKind::Function || segs.front().name != "main")
        {
            config_error(fmt::format("region path '{}' must start at main and name a region below it", r.path.str()));
        }
        if (segs.back().kind != NodeKind::Function)
        {
            config_error(fmt::format("region path '{}' must end in a function", r.path.str()));
        }
        if (!seen.insert(r.path).second)
        {
            config_error(fmt::format("region path '{}' listed twice", r.path.str()));
        }
        validate_surface(r.surface, spec.grid);
    }
    for (const auto &pc : spec.phase_changes)
    {
        if (pc.region >= spec.regions.size())
        {
            config_error("phase change refers to an unknown region");
        }
        validate_surface({pc.shape, spec.regions[pc.region].surface.runtime}, spec.grid);
    }
}

ExperimentSpec spec_from_json(const json &j)
{
    if (!j.is_object())
    {
        config_error("experiment spec must be a JSON object");
    }
    ExperimentSpec spec;
    try
    {
        if (j.contains("grid"))
        {
            spec.grid = grid_from_json(j.at("grid"));
        }
        if (j.contains("learner"))
        {
            spec.learner = learner_from_json(j.at("learner"));
        }
        if (j.contains("meter"))
        {
            const auto &m = j.at("meter");
            spec.meter.static_offset_w = number_or(m, "static_offset_w", spec.meter.static_offset_w, "meter");
            spec.meter.noise_sigma_rel = number_or(m, "noise_sigma_rel", spec.meter.noise_sigma_rel, "meter");
        }
        if (j.contains("restart_mode"))
        {
            if (!j.at("restart_mode").is_string())
            {
                config_error("'restart_mode' must be a string");
            }
            spec.restart_mode = parse_restart_mode(j.at("restart_mode").get<std::string>());
        }
        spec.process_count = count_or(j, "processes", 1, "spec");
        spec.iterations = count_or(j, "iterations", 1, "spec");
        spec.master_seed = count_or(j, "seed", 0, "spec");
        spec.candidate_threshold_ms = number_or(j, "candidate_threshold_ms", 100.0, "spec");
        spec.start = state_from_json(require(j, "start", "spec"), spec.grid, "start");
        spec.default_state = state_from_json(require(j, "default", "spec"), spec.grid, "default");

        const auto &regions = require(j, "regions", "spec");
        if (!regions.is_array())
        {
            config_error("'regions' must be an array");
        }
        for (const auto &r : regions)
        {
            const auto &path = require(r, "path", "region");
            if (!path.is_string())
            {
                config_error("region: 'path' must be a string");
            }
            RegionSpec region;
            region.path = RtsId::parse(path.get<std::string>());
            region.surface.shape = shape_from_json(require(r, "surface", "region"));
            region.surface.runtime.base_ms = number(r, "duration_ms", "region");
            region.surface.runtime.sensitivity = number_or(r, "runtime_sensitivity", 0.0, "region");
            spec.regions.push_back(std::move(region));
        }

        if (j.contains("phase_changes"))
        {
            const auto &changes = j.at("phase_changes");
            if (!changes.is_array())
            {
                config_error("'phase_changes' must be an array");
            }
            for (const auto &c : changes)
            {
                PhaseChange pc;
                pc.iteration = count_or(c, "iteration", 0, "phase change");
                if (c.contains("region"))
                {
                    const auto &reg = c.at("region");
                    if (reg.is_number_integer())
                    {
                        pc.region = reg.get<std::size_t>();
                    }
                    else if (reg.is_string())
                    {
                        const auto id = RtsId::parse(reg.get<std::string>());
                        auto it = std::find_if(spec.regions.begin(), spec.regions.end(),
                            [&](const RegionSpec &rs) { return rs.path == id; });
                        if (it == spec.regions.end())
                        {
                            config_error(fmt::format("phase change names unknown region '{}'", id.str()));
                        }
                        pc.region = static_cast<std::size_t>(it - spec.regions.begin());
                    }
                    else
                    {
                        config_error("phase change 'region' must be an index or a path");
                    }
                }
                pc.shape = shape_from_json(require(c, "surface", "phase change"));
                spec.phase_changes.push_back(std::move(pc));
            }
        }
    }
    catch (const Error &e)
    {
        if (e.code() == ErrorCode::InvalidConfig)
        {
            throw;
        }
        config_error(e.what());
    }
    catch (const json::exception &e)
    {
        config_error(e.what());
    }
    validate_spec(spec);
    return spec;
}

ordered_json spec_to_json(const ExperimentSpec &spec)
{
    ordered_json j;
    j["grid"] = grid_to_json(spec.grid);
    j["learner"] = learner_to_json(spec.learner);
    j["meter"] = {{"static_offset_w", spec.meter.static_offset_w}, {"noise_sigma_rel", spec.meter.noise_sigma_rel}};
    j["restart_mode"] = to_string(spec.restart_mode);
    j["processes"] = spec.process_count;
    j["iterations"] = spec.iterations;
    j["seed"] = spec.master_seed;
    j["candidate_threshold_ms"] = spec.candidate_threshold_ms;
    j["start"] = state_to_json(spec.start, spec.grid);
    j["default"] = state_to_json(spec.default_state, spec.grid);
    j["regions"] = ordered_json::array();
    for (const auto &r : spec.regions)
    {
        ordered_json rj;
        rj["path"] = r.path.str();
        rj["duration_ms"] = r.surface.runtime.base_ms;
        rj["runtime_sensitivity"] = r.surface.runtime.sensitivity;
        rj["surface"] = shape_to_json(r.surface.shape);
        j["regions"].push_back(std::move(rj));
    }
    j["phase_changes"] = ordered_json::array();
    for (const auto &pc : spec.phase_changes)
    {
        ordered_json pj;
        pj["iteration"] = pc.iteration;
        pj["region"] = spec.regions.at(pc.region).path.str();
        pj["surface"] = shape_to_json(pc.shape);
        j["phase_changes"].push_back(std::move(pj));
    }
    return j;
}

ExperimentSpec load_spec(const std::filesystem::path &path)
{
    std::ifstream in(path);
    if (!in)
    {
        config_error(fmt::format("cannot open spec file '{}'", path.string()));
    }
    json j;
    try
    {
        j = json::parse(in);
    }
    catch (const json::exception &e)
    {
        config_error(fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return spec_from_json(j);
}

} // namespace freqtune

namespace freqtune
{

namespace
{

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t process_seed(std::uint64_t master_seed, std::size_t process_index)
{
    return splitmix64(splitmix64(master_seed) ^ static_cast<std::uint64_t>(process_index));
}

std::uint64_t learner_stream_seed(std::uint64_t master_seed, std::size_t process_index)
{
    return splitmix64(process_seed(master_seed, process_index) ^ 0x1ULL);
}

std::uint64_t meter_stream_seed(std::uint64_t master_seed, std::size_t process_index)
{
    return splitmix64(process_seed(master_seed, process_index) ^ 0x2ULL);
}

} // namespace freqtune
