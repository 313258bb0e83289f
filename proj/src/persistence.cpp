#include "freqtune/persistence.hpp"

#include "freqtune/errors.hpp"

#include <fmt/format.h>

#include <fstream>
#include <system_error>
#include <unistd.h>

namespace freqtune
{

using nlohmann::json;
using nlohmann::ordered_json;

namespace
{

[[noreturn]] void corrupt(const std::string &message)
{
    throw Error(ErrorCode::CorruptSnapshot, message);
}

const json &field(const json &j, const char *key)
{
    if (!j.is_object() || !j.contains(key))
    {
        corrupt(fmt::format("missing field '{}'", key));
    }
    return j.at(key);
}

int int_field(const json &j, const char *key)
{
    const auto &v = field(j, key);
    if (!v.is_number_integer())
    {
        corrupt(fmt::format("field '{}' must be an integer", key));
    }
    return v.get<int>();
}

double real_field(const json &j, const char *key)
{
    const auto &v = field(j, key);
    if (!v.is_number())
    {
        corrupt(fmt::format("field '{}' must be a number", key));
    }
    return v.get<double>();
}

ordered_json state_json(ConfigState s)
{
    return {{"core_idx", s.core_idx}, {"uncore_idx", s.uncore_idx}};
}

ConfigState state_from(const json &j, const FrequencyGrid &grid)
{
    ConfigState s{int_field(j, "core_idx"), int_field(j, "uncore_idx")};
    if (!grid.contains(s))
    {
        corrupt(fmt::format("state ({},{}) outside the grid", s.core_idx, s.uncore_idx));
    }
    return s;
}

ordered_json action_json(ActionDelta a)
{
    return ordered_json::array({a.core_delta, a.uncore_delta});
}

ActionDelta action_from(const json &j)
{
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer())
    {
        corrupt("action must be a pair of integers");
    }
    ActionDelta a{j[0].get<int>(), j[1].get<int>()};
    if (!is_unit_delta(a))
    {
        corrupt("action deltas must lie in {-1, 0, 1}");
    }
    return a;
}

ordered_json sample_json(const EnergySample &e)
{
    ordered_json j = state_json(e.state);
    j["joules"] = e.joules;
    j["duration_ms"] = e.duration_ms;
    return j;
}

EnergySample sample_from(const json &j, const FrequencyGrid &grid)
{
    return {real_field(j, "joules"), real_field(j, "duration_ms"), state_from(j, grid)};
}

ordered_json tuner_state_json(const TunerState &ts)
{
    ordered_json j;
    j["rts"] = ts.rts.str();
    j["current"] = state_json(ts.current);
    j["prev"] = ts.prev ? state_json(*ts.prev) : ordered_json(nullptr);
    j["prev_action"] = ts.prev_action ? action_json(*ts.prev_action) : ordered_json(nullptr);
    j["prev_energy"] = ts.prev_energy ? sample_json(*ts.prev_energy) : ordered_json(nullptr);
    j["prev_explored"] = ts.prev_explored;
    j["step"] = ts.step;
    return j;
}

TunerState tuner_state_from(const json &j, const FrequencyGrid &grid)
{
    TunerState ts;
    const auto &rts = field(j, "rts");
    if (!rts.is_string())
    {
        corrupt("'rts' must be a string");
    }
    try
    {
        ts.rts = RtsId::parse(rts.get<std::string>());
    }
    catch (const Error &e)
    {
        corrupt(e.what());
    }
    ts.current = state_from(field(j, "current"), grid);
    const auto &prev = field(j, "prev");
    const auto &prev_action = field(j, "prev_action");
    const auto &prev_energy = field(j, "prev_energy");
    if (prev.is_null() != prev_action.is_null() || prev.is_null() != prev_energy.is_null())
    {
        corrupt("prev, prev_action and prev_energy must be all set or all null");
    }
    if (!prev.is_null())
    {
        ts.prev = state_from(prev, grid);
        ts.prev_action = action_from(prev_action);
        ts.prev_energy = sample_from(prev_energy, grid);
        if (!is_valid_action(grid, *ts.prev, *ts.prev_action) ||
            apply_action(grid, *ts.prev, *ts.prev_action) != ts.current)
        {
            corrupt("previous state and action do not lead to the current state");
        }
    }
    const auto &explored = field(j, "prev_explored");
    if (!explored.is_boolean())
    {
        corrupt("'prev_explored' must be a boolean");
    }
    ts.prev_explored = explored.get<bool>();
    const auto &step = field(j, "step");
    if (!step.is_number_unsigned())
    {
        corrupt("'step' must be a non-negative integer");
    }
    ts.step = step.get<std::uint64_t>();
    return ts;
}

Rng rng_field(const json &j, const char *key)
{
    const auto &v = field(j, key);
    if (!v.is_string())
    {
        corrupt(fmt::format("'{}' must be an RNG state token", key));
    }
    return rng_from_token(v.get<std::string>());
}

} // namespace

ProcessTuners fresh_tuners(const ExperimentSpec &spec, std::size_t process_index)
{
    ProcessTuners p;
    p.process_index = process_index;
    p.learner_rng.seed(learner_stream_seed(spec.master_seed, process_index));
    p.meter_rng.seed(meter_stream_seed(spec.master_seed, process_index));
    return p;
}

Snapshot make_snapshot(const ExperimentSpec &spec, const ProcessTuners &process)
{
    Snapshot s;
    s.grid = spec.grid;
    s.learner = spec.learner;
    s.process = process;
    return s;
}

ordered_json qtable_to_json(const QTable &table)
{
    const auto &grid = table.grid();
    ordered_json j;
    j["grid"] = grid_to_json(grid);
    auto entries = ordered_json::array();
    auto energies = ordered_json::array();
    auto visited = ordered_json::array();
    for (std::size_t i = 0; i < grid.size(); ++i)
    {
        const ConfigState s = grid.state_at(i);
        for (const auto a : valid_actions(grid, s))
        {
            ordered_json e = state_json(s);
            e["action"] = action_json(a);
            e["q"] = table.q(s, a);
            e["learned"] = table.is_learned(s, a);
            entries.push_back(std::move(e));
        }
        if (const auto &le = table.last_energy(s))
        {
            energies.push_back(sample_json(*le));
        }
        if (table.visited(s))
        {
            visited.push_back(state_json(s));
        }
    }
    j["entries"] = std::move(entries);
    j["last_energy"] = std::move(energies);
    j["visited"] = std::move(visited);
    return j;
}

QTable qtable_from_json(const json &j)
{
    FrequencyGrid grid = default_grid();
    try
    {
        grid = grid_from_json(field(j, "grid"));
    }
    catch (const Error &e)
    {
        if (e.code() == ErrorCode::CorruptSnapshot)
        {
            throw;
        }
        corrupt(e.what());
    }
    QTable table(grid);
    const auto &entries = field(j, "entries");
    const auto &energies = field(j, "last_energy");
    const auto &visited = field(j, "visited");
    if (!entries.is_array() || !energies.is_array() || !visited.is_array())
    {
        corrupt("entries, last_energy and visited must be arrays");
    }
    for (const auto &v : visited)
    {
        table.mark_visited(state_from(v, grid));
    }
    for (const auto &e : entries)
    {
        const ConfigState s = state_from(e, grid);
        const ActionDelta a = action_from(field(e, "action"));
        if (!table.has_entry(s, a))
        {
            corrupt(fmt::format("entry for invalid action at ({},{})", s.core_idx, s.uncore_idx));
        }
        table.set_initial_q(s, a, real_field(e, "q"));
        if (e.contains("learned"))
        {
            if (!e["learned"].is_boolean())
            {
                corrupt("'learned' must be a boolean");
            }
            table.set_learned(s, a, e["learned"].get<bool>());
        }
    }
    for (const auto &e : energies)
    {
        const EnergySample sample = sample_from(e, grid);
        if (!table.visited(sample.state))
        {
            corrupt("last_energy recorded for a state that was never visited");
        }
        table.record_energy(sample.state, sample);
    }
    return table;
}

ordered_json snapshot_to_json(const Snapshot &snapshot)
{
    ordered_json j;
    j["format_version"] = snapshot.format_version;
    j["created_by"] = snapshot.created_by;
    j["process"] = snapshot.process.process_index;
    j["iterations_completed"] = snapshot.process.iterations_completed;
    j["grid"] = grid_to_json(snapshot.grid);
    j["learner"] = learner_to_json(snapshot.learner);
    j["rng"] = {{"learner", rng_to_token(snapshot.process.learner_rng)},
        {"meter", rng_to_token(snapshot.process.meter_rng)}};
    auto tuners = ordered_json::array();
    for (const auto &[rts, tuner] : snapshot.process.tuners)
    {
        ordered_json t;
        t["rts"] = rts.str();
        t["state"] = tuner_state_json(tuner.state);
        t["qtable"] = qtable_to_json(tuner.table);
        tuners.push_back(std::move(t));
    }
    j["tuners"] = std::move(tuners);
    return j;
}

Snapshot snapshot_from_json(const json &j)
{
    Snapshot s;
    s.format_version = int_field(j, "format_version");
    if (s.format_version != kSnapshotFormatVersion)
    {
        corrupt(fmt::format("unsupported snapshot format version {}", s.format_version));
    }
    try
    {
        s.grid = grid_from_json(field(j, "grid"));
        s.learner = learner_from_json(field(j, "learner"));
    }
    catch (const Error &e)
    {
        if (e.code() == ErrorCode::CorruptSnapshot)
        {
            throw;
        }
        corrupt(e.what());
    }
    const auto &created_by = field(j, "created_by");
    if (!created_by.is_string())
    {
        corrupt("'created_by' must be a string");
    }
    s.created_by = created_by.get<std::string>();
    const auto &process = field(j, "process");
    const auto &iterations = field(j, "iterations_completed");
    if (!process.is_number_unsigned() || !iterations.is_number_unsigned())
    {
        corrupt("'process' and 'iterations_completed' must be non-negative integers");
    }
    s.process.process_index = process.get<std::size_t>();
    s.process.iterations_completed = iterations.get<std::uint64_t>();
    const auto &rng = field(j, "rng");
    s.process.learner_rng = rng_field(rng, "learner");
    s.process.meter_rng = rng_field(rng, "meter");

    const auto &tuners = field(j, "tuners");
    if (!tuners.is_array())
    {
        corrupt("'tuners' must be an array");
    }
    for (const auto &t : tuners)
    {
        QTable table = qtable_from_json(field(t, "qtable"));
        if (!(table.grid() == s.grid))
        {
            corrupt("tuner table grid differs from the snapshot grid");
        }
        TunerState state = tuner_state_from(field(t, "state"), s.grid);
        const auto &rts = field(t, "rts");
        if (!rts.is_string() || rts.get<std::string>() != state.rts.str())
        {
            corrupt("tuner key does not match its state");
        }
        RtsId key = state.rts;
        if (!s.process.tuners.emplace(std::move(key), Tuner{std::move(table), std::move(state)}).second)
        {
            corrupt(fmt::format("duplicate tuner '{}'", rts.get<std::string>()));
        }
    }
    return s;
}

void save_snapshot(const Snapshot &snapshot, const std::filesystem::path &path)
{
    namespace fs = std::filesystem;
    const fs::path tmp = path.string() + fmt::format(".tmp-{}", ::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
        {
            throw Error(ErrorCode::IoFailure, fmt::format("cannot write '{}'", tmp.string()));
        }
        out << snapshot_to_json(snapshot).dump(1) << '\n';
        out.flush();
        if (!out)
        {
            std::error_code ignore;
            fs::remove(tmp, ignore);
            throw Error(ErrorCode::IoFailure, fmt::format("write to '{}' failed", tmp.string()));
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec)
    {
        std::error_code ignore;
        fs::remove(tmp, ignore);
        throw Error(ErrorCode::IoFailure, fmt::format("cannot move snapshot into '{}': {}", path.string(), ec.message()));
    }
}

Snapshot read_snapshot(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw Error(ErrorCode::IoFailure, fmt::format("cannot read snapshot '{}'", path.string()));
    }
    json j;
    try
    {
        j = json::parse(in);
    }
    catch (const json::exception &e)
    {
        corrupt(fmt::format("'{}' is not valid JSON: {}", path.string(), e.what()));
    }
    return snapshot_from_json(j);
}

ProcessTuners load_snapshot(
    const std::filesystem::path &path, RestartMode mode, const ExperimentSpec &spec, std::size_t process_index)
{
    if (mode == RestartMode::Discard)
    {
        return fresh_tuners(spec, process_index);
    }
    Snapshot snap = read_snapshot(path);
    if (!(snap.grid == spec.grid))
    {
        throw Error(ErrorCode::IncompatibleSnapshot, "snapshot grid differs from the experiment grid");
    }
    if (!(snap.learner == spec.learner))
    {
        throw Error(ErrorCode::IncompatibleSnapshot, "snapshot learner config differs from the experiment");
    }
    if (snap.process.process_index != process_index)
    {
        throw Error(ErrorCode::IncompatibleSnapshot,
            fmt::format("snapshot belongs to process {}, not {}", snap.process.process_index, process_index));
    }
    if (mode == RestartMode::Continue)
    {
        return std::move(snap.process);
    }

    ProcessTuners out = fresh_tuners(spec, process_index);
    for (auto &[rts, tuner] : snap.process.tuners)
    {
        out.tuners.emplace(rts, Tuner{std::move(tuner.table), make_tuner_state(rts, spec.start)});
    }
    return out;
}

std::filesystem::path process_snapshot_path(const std::filesystem::path &base, std::size_t process_index)
{
    auto out = base;
    out.replace_filename(fmt::format("{}-p{}{}", base.stem().string(), process_index, base.extension().string()));
    return out;
}

} // namespace freqtune
