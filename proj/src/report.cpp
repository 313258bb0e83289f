#include "freqtune/report.hpp"

#include "freqtune/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <unistd.h>

namespace freqtune
{

using nlohmann::ordered_json;

std::string csv_field(const std::string &text)
{
    if (text.find_first_of(",\"\n\r") == std::string::npos)
    {
        return text;
    }
    std::string out = "\"";
    for (char c : text)
    {
        if (c == '"')
        {
            out.push_back('"');
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::string trajectory_csv(const ExperimentResult &result, const FrequencyGrid &grid)
{
    std::string out = kTrajectoryHeader;
    out.push_back('\n');
    for (const auto &proc : result.processes)
    {
        for (const auto &row : proc.rows)
        {
            std::string step;
            std::string reward;
            std::string q_after;
            std::string explored;
            if (row.kind == RowKind::Initial)
            {
                step = "0";
            }
            else if (row.kind == RowKind::Step)
            {
                step = fmt::format("{}", row.record->step);
                reward = fmt::format("{}", row.record->reward);
                q_after = fmt::format("{}", row.record->q_after);
                explored = row.record->explored ? "1" : "0";
            }
            out += fmt::format("{},{},{},{},{},{},{},{},{}\n", step, row.process, csv_field(row.rts.str()),
                grid.core_ghz(row.state), grid.uncore_ghz(row.state), row.energy_j, reward, q_after, explored);
        }
    }
    return out;
}

std::string heatmap_csv(const ExperimentResult &result, const FrequencyGrid &grid)
{
    std::string out = "process,rts,core_ghz,uncore_ghz,visits,last_energy_j\n";
    for (const auto &proc : result.processes)
    {
        for (const auto &[rts, tuner] : proc.tuners.tuners)
        {
            std::vector<std::size_t> visits(grid.size(), 0);
            for (const auto &row : proc.rows)
            {
                if (row.kind != RowKind::Untuned && row.rts == rts)
                {
                    ++visits[grid.flat_index(row.state)];
                }
            }
            const std::string name = csv_field(rts.str());
            for (std::size_t i = 0; i < grid.size(); ++i)
            {
                const ConfigState s = grid.state_at(i);
                const auto &last = tuner.table.last_energy(s);
                out += fmt::format("{},{},{},{},{},{}\n", proc.process_index, name, grid.core_ghz(s),
                    grid.uncore_ghz(s), visits[i], last ? fmt::format("{}", last->joules) : std::string());
            }
        }
    }
    return out;
}

ordered_json summary_json(const ExperimentSpec &spec, const ExperimentResult &result)
{
    ordered_json j;
    j["processes"] = spec.process_count;
    j["iterations"] = spec.iterations;
    j["seed"] = spec.master_seed;
    j["restart_mode"] = to_string(spec.restart_mode);
    j["learner"] = learner_to_json(spec.learner);
    j["total_tuned_energy_j"] = result.tuned_energy_j;
    j["total_baseline_energy_j"] = result.baseline_energy_j;
    j["savings_fraction"] = result.savings_fraction;
    j["total_tuned_time_ms"] = result.tuned_time_ms;
    j["total_baseline_time_ms"] = result.baseline_time_ms;
    j["runtime_overhead_fraction"] = result.runtime_overhead_fraction;
    auto finals = ordered_json::array();
    for (const auto &f : result.final_states)
    {
        ordered_json fj;
        fj["process"] = f.process;
        fj["rts"] = f.rts.str();
        fj["core_ghz"] = spec.grid.core_ghz(f.modal);
        fj["uncore_ghz"] = spec.grid.uncore_ghz(f.modal);
        fj["core_idx"] = f.modal.core_idx;
        fj["uncore_idx"] = f.modal.uncore_idx;
        fj["last_core_ghz"] = spec.grid.core_ghz(f.last);
        fj["last_uncore_ghz"] = spec.grid.uncore_ghz(f.last);
        finals.push_back(std::move(fj));
    }
    j["final_states"] = std::move(finals);
    return j;
}

std::string sweep_csv(const std::vector<SweepRow> &rows)
{
    std::string out = "value,savings,steps_to_convergence\n";
    for (const auto &r : rows)
    {
        out += fmt::format("{},{},{}\n", r.value, r.savings,
            r.steps_to_convergence ? fmt::format("{}", *r.steps_to_convergence) : std::string());
    }
    return out;
}

std::optional<std::uint64_t> steps_to_convergence(const ExperimentSpec &spec, const ExperimentResult &result)
{
    std::uint64_t worst = 0;
    bool any = false;
    for (const auto &proc : result.processes)
    {
        for (const auto &[rts, tuner] : proc.tuners.tuners)
        {
            auto it = std::find_if(spec.regions.begin(), spec.regions.end(),
                [&](const RegionSpec &r) { return r.path == rts; });
            if (it == spec.regions.end())
            {
                continue; // internal region, no single surface to compare against
            }
            const auto surfaces = surfaces_at(spec, proc.first_iteration);
            const auto &surface = surfaces[static_cast<std::size_t>(it - spec.regions.begin())];
            const auto target = optimum_state(surface, spec.grid, spec.meter.static_offset_w).state;
            const auto hit = first_step_within(proc.rows, rts, target);
            if (!hit)
            {
                return std::nullopt;
            }
            worst = std::max(worst, *hit);
            any = true;
        }
    }
    if (!any)
    {
        return std::nullopt;
    }
    return worst;
}

std::vector<RegionOracle> region_oracles(const ExperimentSpec &spec)
{
    std::set<std::uint64_t> phases{0};
    for (const auto &pc : spec.phase_changes)
    {
        phases.insert(pc.iteration);
    }
    std::vector<RegionOracle> out;
    for (const auto it : phases)
    {
        const auto surfaces = surfaces_at(spec, it);
        for (std::size_t r = 0; r < spec.regions.size(); ++r)
        {
            const bool changed = it == 0 || std::any_of(spec.phase_changes.begin(), spec.phase_changes.end(),
                                                [&](const PhaseChange &pc) { return pc.iteration == it && pc.region == r; });
            if (!changed)
            {
                continue;
            }
            RegionOracle o;
            o.rts = spec.regions[r].path;
            o.from_iteration = it;
            o.optimum = optimum_state(surfaces[r], spec.grid, spec.meter.static_offset_w);
            o.default_energy_j = noiseless_energy_j(surfaces[r], spec.default_state, spec.grid, spec.meter.static_offset_w);
            o.savings_bound = 1.0 - o.optimum.joules / o.default_energy_j;
            out.push_back(std::move(o));
        }
    }
    return out;
}

void write_file_atomic(const std::filesystem::path &path, const std::string &content)
{
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + fmt::format(".tmp-{}", ::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out)
        {
            std::error_code ignore;
            fs::remove(tmp, ignore);
            throw Error(ErrorCode::IoFailure, fmt::format("cannot write '{}'", path.string()));
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
    {
        std::error_code ignore;
        fs::remove(tmp, ignore);
        throw Error(ErrorCode::IoFailure, fmt::format("cannot write '{}': {}", path.string(), ec.message()));
    }
}

} // namespace freqtune
