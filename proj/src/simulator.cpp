#include "freqtune/simulator.hpp"

#include "freqtune/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <thread>

namespace freqtune
{

namespace
{

bool same_segment(const CallTreeNode &node, const PathSegment &seg)
{
    return node.kind == seg.kind && node.name == seg.name && node.param_value == seg.value;
}

std::vector<const PhaseChange *> ordered_changes(const ExperimentSpec &spec)
{
    std::vector<const PhaseChange *> out;
    for (const auto &pc : spec.phase_changes)
    {
        out.push_back(&pc);
    }
    std::stable_sort(out.begin(), out.end(),
        [](const PhaseChange *a, const PhaseChange *b) { return a->iteration < b->iteration; });
    return out;
}

/// Drives one logical process. Owns its call tree, meter and tuners; shares
/// nothing with other processes.
class ProcessSimulator
{
public:
    ProcessSimulator(const ExperimentSpec &spec, std::size_t process_index, ProcessTuners tuners)
        : spec_(spec),
          process_(process_index),
          tuners_(std::move(tuners)),
          meter_(MeterConfig{spec.meter.static_offset_w, spec.meter.noise_sigma_rel,
              meter_stream_seed(spec.master_seed, process_index)}),
          applied_(spec.default_state)
    {
        meter_.rng() = tuners_.meter_rng;
        surfaces_.reserve(spec.regions.size());
        for (const auto &r : spec.regions)
        {
            surfaces_.push_back(r.surface);
        }
        changes_ = ordered_changes(spec);
    }

    ProcessResult run(std::uint64_t iterations)
    {
        ProcessResult result;
        result.process_index = process_;
        result.first_iteration = tuners_.iterations_completed;

        const std::uint64_t first = tuners_.iterations_completed;
        for (const auto *pc : changes_)
        {
            if (pc->iteration < first)
            {
                surfaces_[pc->region].shape = pc->shape;
            }
        }

        rows_ = &result.rows;
        enter_function("main");
        for (std::uint64_t it = first; it < first + iterations; ++it)
        {
            iteration_ = it;
            for (const auto *pc : changes_)
            {
                if (pc->iteration == it)
                {
                    surfaces_[pc->region].shape = pc->shape;
                }
            }
            for (std::size_t r = 0; r < spec_.regions.size(); ++r)
            {
                run_region(r);
            }
            close_to_depth(1);
        }
        close_to_depth(0);
        rows_ = nullptr;

        tuners_.iterations_completed = first + iterations;
        tuners_.meter_rng = meter_.rng();
        result.energy_j = energy_j_;
        result.time_ms = clock_ms_;
        result.tuners = tuners_;
        return result;
    }

private:
    struct Frame
    {
        NodeId node;
        ConfigState restore;
        Tuner *tuner;
        double energy_j;
    };

    Tuner *tuner_for(NodeId id)
    {
        if (id >= node_tuner_.size())
        {
            node_tuner_.resize(id + 1, nullptr);
            node_checked_.resize(id + 1, false);
        }
        if (!node_checked_[id])
        {
            node_checked_[id] = true;
            auto it = tuners_.tuners.find(tree_.rts_path(id));
            node_tuner_[id] = it == tuners_.tuners.end() ? nullptr : &it->second;
        }
        return node_tuner_[id];
    }

    void enter_function(const std::string &name)
    {
        const NodeId id = tree_.enter_region(name, clock_ms_);
        Tuner *tuner = tuner_for(id);
        frames_.push_back({id, applied_, tuner, 0.0});
        if (tuner)
        {
            applied_ = tuner->state.current;
        }
    }

    void exit_function()
    {
        const Frame frame = frames_.back();
        frames_.pop_back();
        const auto &node = tree_.node(frame.node);
        const double elapsed = tree_.exit_region(node.name, clock_ms_);
        applied_ = frame.restore;

        if (frame.tuner)
        {
            auto &tuner = *frame.tuner;
            const EnergySample sample{frame.energy_j, elapsed, tuner.state.current};
            const auto outcome = tuner_step(tuner.state, tuner.table, sample, spec_.learner, tuners_.learner_rng);
            TrajectoryRow row;
            row.process = process_;
            row.iteration = iteration_;
            row.rts = tuner.state.rts;
            row.kind = outcome.record ? RowKind::Step : RowKind::Initial;
            row.state = sample.state;
            row.energy_j = sample.joules;
            row.duration_ms = elapsed;
            row.record = outcome.record;
            rows_->push_back(std::move(row));
            return;
        }

        if (frame.node != tree_.root() && node.call_count >= 2 &&
            is_tuning_candidate(tree_, frame.node, spec_.candidate_threshold_ms))
        {
            RtsId rts = tree_.rts_path(frame.node);
            auto [it, inserted] = tuners_.tuners.emplace(
                rts, Tuner{init_qtable(spec_.grid, spec_.start, spec_.learner), make_tuner_state(rts, spec_.start)});
            node_tuner_[frame.node] = &it->second;
        }
    }

    void close_to_depth(std::size_t depth)
    {
        while (tree_.open_path().size() > depth)
        {
            const auto &top = tree_.node(tree_.open_path().back());
            if (top.kind == NodeKind::Function)
            {
                exit_function();
            }
            else
            {
                tree_.unset_parameter(top.name);
            }
        }
    }

    void run_region(std::size_t r)
    {
        const auto segs = spec_.regions[r].path.segments();
        const auto prefix = segs.first(segs.size() - 1);

        const auto open = tree_.open_path();
        std::size_t common = 0;
        while (common < open.size() && common < prefix.size() && same_segment(tree_.node(open[common]), prefix[common]))
        {
            ++common;
        }
        close_to_depth(common);
        for (std::size_t i = common; i < prefix.size(); ++i)
        {
            if (prefix[i].kind == NodeKind::Function)
            {
                enter_function(prefix[i].name);
            }
            else
            {
                tree_.set_parameter(prefix[i].name, prefix[i].value.value_or(""));
            }
        }

        enter_function(segs.back().name);
        const EnergySample sample = meter_.measure(surfaces_[r], applied_, spec_.grid);
        clock_ms_ += sample.duration_ms;
        energy_j_ += sample.joules;

        auto owner = std::find_if(frames_.rbegin(), frames_.rend(), [](const Frame &f) { return f.tuner != nullptr; });
        if (owner != frames_.rend())
        {
            owner->energy_j += sample.joules;
        }
        else
        {
            TrajectoryRow row;
            row.process = process_;
            row.iteration = iteration_;
            row.rts = spec_.regions[r].path;
            row.kind = RowKind::Untuned;
            row.state = applied_;
            row.energy_j = sample.joules;
            row.duration_ms = sample.duration_ms;
            rows_->push_back(std::move(row));
        }
        exit_function();
    }

    const ExperimentSpec &spec_;
    std::size_t process_;
    ProcessTuners tuners_;
    EnergyMeter meter_;
    std::vector<EnergySurface> surfaces_;
    std::vector<const PhaseChange *> changes_;

    CallTree tree_;
    std::vector<Frame> frames_;
    std::vector<Tuner *> node_tuner_;
    std::vector<bool> node_checked_;
    ConfigState applied_;
    double clock_ms_ = 0.0;
    double energy_j_ = 0.0;
    std::uint64_t iteration_ = 0;
    std::vector<TrajectoryRow> *rows_ = nullptr;
};

} // namespace

std::vector<EnergySurface> surfaces_at(const ExperimentSpec &spec, std::uint64_t iteration)
{
    std::vector<EnergySurface> out;
    for (const auto &r : spec.regions)
    {
        out.push_back(r.surface);
    }
    for (const auto *pc : ordered_changes(spec))
    {
        if (pc->iteration <= iteration)
        {
            out.at(pc->region).shape = pc->shape;
        }
    }
    return out;
}

namespace
{

template <class PerInvocation>
double pinned_total(const ExperimentSpec &spec, std::uint64_t first_iteration, PerInvocation per_invocation)
{
    double total = 0.0;
    auto surfaces = surfaces_at(spec, first_iteration);
    const auto changes = ordered_changes(spec);
    for (std::uint64_t it = first_iteration; it < first_iteration + spec.iterations; ++it)
    {
        for (const auto *pc : changes)
        {
            if (pc->iteration == it)
            {
                surfaces.at(pc->region).shape = pc->shape;
            }
        }
        for (const auto &s : surfaces)
        {
            total += per_invocation(s);
        }
    }
    return total;
}

} // namespace

double baseline_energy(const ExperimentSpec &spec, std::uint64_t first_iteration)
{
    return pinned_total(spec, first_iteration, [&](const EnergySurface &s) {
        return noiseless_energy_j(s, spec.default_state, spec.grid, spec.meter.static_offset_w);
    });
}

double baseline_time_ms(const ExperimentSpec &spec, std::uint64_t first_iteration)
{
    return pinned_total(spec, first_iteration,
        [&](const EnergySurface &s) { return invocation_duration_ms(s, spec.default_state, spec.grid); });
}

ProcessResult run_process(const ExperimentSpec &spec, std::size_t process_index, ProcessTuners start)
{
    start.process_index = process_index;
    ProcessSimulator sim(spec, process_index, std::move(start));
    return sim.run(spec.iterations);
}

ProcessResult run_process(const ExperimentSpec &spec, std::size_t process_index)
{
    return run_process(spec, process_index, fresh_tuners(spec, process_index));
}

ExperimentResult run_experiment(const ExperimentSpec &spec, const RunOptions &options)
{
    validate_spec(spec);
    if (!options.resume.empty() && options.resume.size() != spec.process_count)
    {
        throw Error(ErrorCode::InvalidConfig,
            fmt::format("{} resume states given for {} processes", options.resume.size(), spec.process_count));
    }

    ExperimentResult result;
    result.processes.resize(spec.process_count);
    auto work = [&](std::size_t p) {
        result.processes[p] = options.resume.empty() ? run_process(spec, p) : run_process(spec, p, options.resume[p]);
    };

    const std::size_t workers = std::clamp<std::size_t>(options.workers, 1, spec.process_count);
    if (workers == 1)
    {
        for (std::size_t p = 0; p < spec.process_count; ++p)
        {
            work(p);
        }
    }
    else
    {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w)
        {
            pool.emplace_back([&, w] {
                try
                {
                    for (std::size_t p = w; p < spec.process_count; p += workers)
                    {
                        work(p);
                    }
                }
                catch (...)
                {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto &t : pool)
        {
            t.join();
        }
        for (auto &e : errors)
        {
            if (e)
            {
                std::rethrow_exception(e);
            }
        }
    }

    for (const auto &proc : result.processes)
    {
        result.tuned_energy_j += proc.energy_j;
        result.tuned_time_ms += proc.time_ms;
        result.baseline_energy_j += baseline_energy(spec, proc.first_iteration);
        result.baseline_time_ms += baseline_time_ms(spec, proc.first_iteration);
        for (const auto &[rts, tuner] : proc.tuners.tuners)
        {
            const auto modal = modal_state(proc.rows, rts);
            result.final_states.push_back({proc.process_index, rts, modal.value_or(tuner.state.current),
                tuner.state.current});
        }
    }
    result.savings_fraction = 1.0 - result.tuned_energy_j / result.baseline_energy_j;
    result.runtime_overhead_fraction = result.tuned_time_ms / result.baseline_time_ms - 1.0;
    return result;
}

ExperimentResult phase_change_response(const ExperimentSpec &spec, const RunOptions &options)
{
    validate_spec(spec);
    if (spec.phase_changes.size() != 1)
    {
        throw Error(ErrorCode::InvalidConfig, "phase change response needs exactly one phase change");
    }
    const auto &pc = spec.phase_changes.front();
    const auto &region = spec.regions.at(pc.region);
    const auto before = optimum_state(region.surface, spec.grid, spec.meter.static_offset_w);
    const auto after = optimum_state({pc.shape, region.surface.runtime}, spec.grid, spec.meter.static_offset_w);
    if (grid_distance(before.state, after.state) < 3)
    {
        throw Error(ErrorCode::InvalidConfig, "phase change must move the optimum by at least three grid steps");
    }
    return run_experiment(spec, options);
}

std::optional<ConfigState> modal_state(std::span<const TrajectoryRow> rows, const RtsId &rts, double tail_fraction)
{
    std::vector<ConfigState> states;
    for (const auto &row : rows)
    {
        if (row.kind != RowKind::Untuned && row.rts == rts)
        {
            states.push_back(row.state);
        }
    }
    if (states.empty())
    {
        return std::nullopt;
    }
    const auto tail = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(states.size()))));
    std::map<ConfigState, std::size_t> counts;
    for (auto it = states.end() - static_cast<std::ptrdiff_t>(std::min(tail, states.size())); it != states.end(); ++it)
    {
        ++counts[*it];
    }
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
    {
        if (it->second > best->second)
        {
            best = it;
        }
    }
    return best->first;
}

std::optional<std::uint64_t> first_step_within(
    std::span<const TrajectoryRow> rows, const RtsId &rts, ConfigState target, int radius)
{
    for (const auto &row : rows)
    {
        if (row.kind == RowKind::Untuned || row.rts != rts)
        {
            continue;
        }
        if (grid_distance(row.state, target) <= radius)
        {
            return row.record ? row.record->step : 0;
        }
    }
    return std::nullopt;
}

} // namespace freqtune
