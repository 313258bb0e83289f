#include "cli.hpp"

#include "freqtune/errors.hpp"
#include "freqtune/persistence.hpp"
#include "freqtune/report.hpp"
#include "freqtune/simulator.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <optional>

namespace freqtune::cli
{

namespace fs = std::filesystem;

namespace
{

struct Overrides
{
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> gamma;
    std::optional<double> epsilon;
    std::optional<std::size_t> processes;
    std::optional<std::uint64_t> iterations;
    std::optional<std::string> restart;
};

struct RunConfig
{
    std::string spec_path;
    std::string out_dir;
    Overrides overrides;
    std::string snapshot_path;
    std::size_t workers = 1;
    bool quiet = false;
};

struct SweepConfig
{
    RunConfig run;
    std::string param = "epsilon";
    std::string values;
    std::size_t seeds = 1;
};

/// Thrown for problems that map onto exit status 1.
struct ConfigProblem : std::runtime_error
{
    using std::runtime_error::runtime_error;
};

void add_overrides(CLI::App &cmd, Overrides &o)
{
    cmd.add_option("--seed", o.seed, "Master seed (falls back to FREQTUNE_SEED, then the spec)");
    cmd.add_option("--alpha", o.alpha, "Learning rate override");
    cmd.add_option("--gamma", o.gamma, "Discount factor override");
    cmd.add_option("--epsilon", o.epsilon, "Exploration probability override");
    cmd.add_option("--processes", o.processes, "Number of simulated processes");
    cmd.add_option("--iterations", o.iterations, "Region repetitions per process");
    cmd.add_option("--restart", o.restart, "Restart mode")
        ->check(CLI::IsMember({"discard", "continue", "reset"}));
}

ExperimentSpec load_with_overrides(const std::string &path, const Overrides &o)
{
    ExperimentSpec spec;
    try
    {
        spec = load_spec(path);
        if (o.seed)
        {
            spec.master_seed = *o.seed;
        }
        else if (const char *env = std::getenv("FREQTUNE_SEED"); env && *env)
        {
            std::uint64_t seed = 0;
            const std::string_view text(env);
            auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
            if (ec != std::errc() || ptr != text.data() + text.size())
            {
                throw ConfigProblem(fmt::format("FREQTUNE_SEED='{}' is not a non-negative integer", text));
            }
            spec.master_seed = seed;
        }
        if (o.alpha)
        {
            spec.learner.alpha = *o.alpha;
        }
        if (o.gamma)
        {
            spec.learner.gamma = *o.gamma;
        }
        if (o.epsilon)
        {
            spec.learner.epsilon = *o.epsilon;
        }
        if (o.processes)
        {
            spec.process_count = *o.processes;
        }
        if (o.iterations)
        {
            spec.iterations = *o.iterations;
        }
        if (o.restart)
        {
            spec.restart_mode = parse_restart_mode(*o.restart);
        }
        validate_spec(spec);
    }
    catch (const Error &e)
    {
        throw ConfigProblem(e.what());
    }
    return spec;
}

void ensure_dir(const std::string &dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
    {
        throw Error(ErrorCode::IoFailure, fmt::format("cannot create output directory '{}': {}", dir, ec.message()));
    }
}

RunOptions resume_options(const ExperimentSpec &spec, const RunConfig &cfg, std::ostream &err)
{
    RunOptions options;
    options.workers = cfg.workers;
    if (cfg.snapshot_path.empty() || spec.restart_mode == RestartMode::Discard)
    {
        return options;
    }
    for (std::size_t p = 0; p < spec.process_count; ++p)
    {
        const auto path = process_snapshot_path(cfg.snapshot_path, p);
        if (!fs::exists(path))
        {
            if (!cfg.quiet)
            {
                fmt::print(err, "no snapshot at {}, process {} starts fresh\n", path.string(), p);
            }
            options.resume.push_back(fresh_tuners(spec, p));
            continue;
        }
        try
        {
            options.resume.push_back(load_snapshot(path, spec.restart_mode, spec, p));
        }
        catch (const Error &e)
        {
            if (e.code() == ErrorCode::IoFailure)
            {
                throw;
            }
            throw ConfigProblem(e.what());
        }
    }
    return options;
}

int cmd_run(const RunConfig &cfg, std::ostream &out, std::ostream &err)
{
    const ExperimentSpec spec = load_with_overrides(cfg.spec_path, cfg.overrides);
    const RunOptions options = resume_options(spec, cfg, err);
    const ExperimentResult result = run_experiment(spec, options);

    const std::string trajectory = trajectory_csv(result, spec.grid);
    const std::string heatmap = heatmap_csv(result, spec.grid);
    const std::string summary = summary_json(spec, result).dump(2) + "\n";

    ensure_dir(cfg.out_dir);
    const fs::path dir(cfg.out_dir);
    write_file_atomic(dir / "trajectory.csv", trajectory);
    write_file_atomic(dir / "heatmap.csv", heatmap);
    write_file_atomic(dir / "summary.json", summary);
    if (!cfg.snapshot_path.empty())
    {
        for (const auto &proc : result.processes)
        {
            save_snapshot(make_snapshot(spec, proc.tuners), process_snapshot_path(cfg.snapshot_path, proc.process_index));
        }
    }

    if (!cfg.quiet)
    {
        fmt::print(out, "tuned {:.1f} J, baseline {:.1f} J, savings {:.2f}%, runtime overhead {:.2f}%\n",
            result.tuned_energy_j, result.baseline_energy_j, 100.0 * result.savings_fraction,
            100.0 * result.runtime_overhead_fraction);
        for (const auto &f : result.final_states)
        {
            fmt::print(out, "  p{} {}: {:.1f} GHz core, {:.1f} GHz uncore\n", f.process, f.rts.str(),
                spec.grid.core_ghz(f.modal), spec.grid.uncore_ghz(f.modal));
        }
    }
    return kOk;
}

double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> parse_values(const std::string &text)
{
    std::vector<double> values;
    std::size_t begin = 0;
    while (begin <= text.size() && !text.empty())
    {
        const auto end = std::min(text.find(',', begin), text.size());
        const std::string item = text.substr(begin, end - begin);
        double v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
        {
            throw ConfigProblem(fmt::format("'{}' is not a number", item));
        }
        values.push_back(v);
        begin = end + 1;
    }
    if (values.empty())
    {
        throw ConfigProblem("sweep needs at least one value");
    }
    return values;
}

int cmd_sweep(const SweepConfig &cfg, std::ostream &out, std::ostream &err)
{
    const std::vector<double> values = parse_values(cfg.values);
    if (cfg.seeds < 1)
    {
        throw ConfigProblem("--seeds must be >= 1");
    }
    const ExperimentSpec base = load_with_overrides(cfg.run.spec_path, cfg.run.overrides);

    std::vector<ExperimentSpec> variants;
    for (double v : values)
    {
        ExperimentSpec spec = base;
        (cfg.param == "alpha" ? spec.learner.alpha : cfg.param == "gamma" ? spec.learner.gamma : spec.learner.epsilon) = v;
        try
        {
            validate_learner(spec.learner);
        }
        catch (const Error &e)
        {
            throw ConfigProblem(e.what());
        }
        variants.push_back(std::move(spec));
    }

    RunOptions options;
    options.workers = cfg.run.workers;
    std::vector<SweepRow> rows;
    for (std::size_t i = 0; i < variants.size(); ++i)
    {
        std::vector<double> savings;
        std::vector<double> steps;
        for (std::size_t k = 0; k < cfg.seeds; ++k)
        {
            ExperimentSpec spec = variants[i];
            spec.master_seed = base.master_seed + k;
            const auto result = run_experiment(spec, options);
            savings.push_back(result.savings_fraction);
            if (const auto s = steps_to_convergence(spec, result))
            {
                steps.push_back(static_cast<double>(*s));
            }
        }
        SweepRow row{values[i], median(savings), std::nullopt};
        if (!steps.empty())
        {
            row.steps_to_convergence = median(steps);
        }
        rows.push_back(row);
        if (!cfg.run.quiet)
        {
            fmt::print(out, "{}={}: median savings {:.2f}%\n", cfg.param, row.value, 100.0 * row.savings);
        }
    }
    (void)err;
    ensure_dir(cfg.run.out_dir);
    write_file_atomic(fs::path(cfg.run.out_dir) / "sweep.csv", sweep_csv(rows));
    return kOk;
}

int cmd_oracle(const std::string &spec_path, std::ostream &out)
{
    const ExperimentSpec spec = load_with_overrides(spec_path, {});
    fmt::print(out, "rts,from_iteration,optimum_core_ghz,optimum_uncore_ghz,optimum_j,default_j,savings_bound\n");
    for (const auto &o : region_oracles(spec))
    {
        fmt::print(out, "{},{},{},{},{},{},{}\n", csv_field(o.rts.str()), o.from_iteration,
            spec.grid.core_ghz(o.optimum.state), spec.grid.uncore_ghz(o.optimum.state), o.optimum.joules,
            o.default_energy_j, o.savings_bound);
    }
    return kOk;
}

} // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
    CLI::App app{"Online core/uncore frequency tuning simulator"};
    app.name("freqtune");
    app.require_subcommand(1);

    RunConfig run_cfg;
    auto *run_cmd = app.add_subcommand("run", "Run an experiment and write trajectory/summary/heatmap");
    run_cmd->add_option("--spec", run_cfg.spec_path, "Experiment spec (JSON)")->required();
    run_cmd->add_option("--out", run_cfg.out_dir, "Output directory")->required();
    add_overrides(*run_cmd, run_cfg.overrides);
    run_cmd->add_option("--snapshot", run_cfg.snapshot_path, "Snapshot base path (one file per process)");
    run_cmd->add_option("--workers", run_cfg.workers, "Worker threads")->check(CLI::PositiveNumber);
    run_cmd->add_flag("--quiet", run_cfg.quiet, "Suppress the summary on stdout");

    SweepConfig sweep_cfg;
    auto *sweep_cmd = app.add_subcommand("sweep", "Run one experiment per hyperparameter value");
    sweep_cmd->add_option("--spec", sweep_cfg.run.spec_path, "Experiment spec (JSON)")->required();
    sweep_cmd->add_option("--out", sweep_cfg.run.out_dir, "Output directory")->required();
    add_overrides(*sweep_cmd, sweep_cfg.run.overrides);
    sweep_cmd->add_option("--param", sweep_cfg.param, "Hyperparameter to vary")
        ->check(CLI::IsMember({"epsilon", "alpha", "gamma"}));
    sweep_cmd->add_option("--values", sweep_cfg.values, "Comma-separated values")->required();
    sweep_cmd->add_option("--seeds", sweep_cfg.seeds, "Seeds per value (median is reported)");
    sweep_cmd->add_option("--workers", sweep_cfg.run.workers, "Worker threads")->check(CLI::PositiveNumber);
    sweep_cmd->add_flag("--quiet", sweep_cfg.run.quiet, "Suppress progress on stdout");

    std::string oracle_spec;
    auto *oracle_cmd = app.add_subcommand("oracle", "Print the exhaustive optimum and savings bound per region");
    oracle_cmd->add_option("--spec", oracle_spec, "Experiment spec (JSON)")->required();

    try
    {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    }
    catch (const CLI::CallForHelp &)
    {
        out << app.help();
        return kOk;
    }
    catch (const CLI::ParseError &e)
    {
        fmt::print(err, "error: {}\n", e.what());
        return kConfigError;
    }

    try
    {
        if (run_cmd->parsed())
        {
            return cmd_run(run_cfg, out, err);
        }
        if (sweep_cmd->parsed())
        {
            return cmd_sweep(sweep_cfg, out, err);
        }
        return cmd_oracle(oracle_spec, out);
    }
    catch (const ConfigProblem &e)
    {
        fmt::print(err, "error: {}\n", e.what());
        return kConfigError;
    }
    catch (const std::exception &e)
    {
        fmt::print(err, "error: {}\n", e.what());
        return kRuntimeError;
    }
}

} // namespace freqtune::cli
