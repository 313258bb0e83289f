#include "helpers.hpp"
#include "printers.hpp"

#include "freqtune/errors.hpp"
#include "freqtune/persistence.hpp"
#include "freqtune/report.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <nlohmann/json.hpp>

using namespace freqtune;

namespace
{

ExperimentSpec small_spec(std::uint64_t iterations)
{
    auto spec = testing::bundled("fig2-replica.json");
    spec.iterations = iterations;
    return spec;
}

ErrorCode load_code(const std::filesystem::path &p, RestartMode m, const ExperimentSpec &spec)
{
    try
    {
        load_snapshot(p, m, spec, 0);
    }
    catch (const Error &e)
    {
        return e.code();
    }
    return ErrorCode::IoFailure;
}

Tuner random_tuner(const FrequencyGrid &grid, std::mt19937_64 &gen, int k)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto coin = [&] { return gen() % 2 == 0; };
    const ConfigState start{int(gen() % grid.core_count()), int(gen() % grid.uncore_count())};
    Tuner t{init_qtable(grid, start, LearnerConfig{}), make_tuner_state(RtsId::parse("main/r" + std::to_string(k)), start)};
    for (std::size_t f = 0; f < grid.size(); ++f)
    {
        const auto s = grid.state_at(f);
        for (auto a : valid_actions(grid, s))
        {
            if (gen() % 3 == 0)
            {
                t.table.set_q(s, a, u(gen) * 1e-3 + u(gen));
            }
        }
        if (gen() % 4 == 0)
        {
            t.table.record_energy(s, EnergySample{100 + 50 * u(gen), 1000 * (1.5 + u(gen)), s});
        }
        else if (gen() % 9 == 0)
        {
            t.table.mark_visited(s);
        }
    }
    if (coin())
    {
        const auto acts = valid_actions(grid, start);
        const auto a = acts[gen() % acts.size()];
        t.state.prev = start;
        t.state.prev_action = a;
        t.state.prev_energy = EnergySample{123.456789012345 + u(gen), 999.5, start};
        t.state.current = apply_action(grid, start, a);
        t.state.prev_explored = coin();
        t.state.step = gen() % 100000;
    }
    return t;
}

} // namespace

TEST_CASE("snapshot round trip on random tuner sets")
{
    std::mt19937_64 gen(17);
    const auto grid = make_grid(frequency_range(1.2, 2.0, 0.1), frequency_range(1.2, 2.4, 0.1));
    testing::TempDir dir;
    for (int i = 0; i < 100; ++i)
    {
        Snapshot snap;
        snap.grid = grid;
        snap.process.process_index = gen() % 8;
        snap.process.iterations_completed = gen() % 1000;
        snap.process.learner_rng.seed(gen());
        snap.process.learner_rng.discard(gen() % 50);
        snap.process.meter_rng.seed(gen());
        const int n = 1 + int(gen() % 3);
        for (int k = 0; k < n; ++k)
        {
            auto t = random_tuner(grid, gen, k);
            snap.process.tuners.emplace(t.state.rts, std::move(t));
        }
        CHECK(snapshot_from_json(nlohmann::json::parse(snapshot_to_json(snap).dump())) == snap);
        if (i % 20 == 0)
        {
            const auto path = dir.path() / "snap.json";
            save_snapshot(snap, path);
            CHECK(read_snapshot(path) == snap);
        }
    }
}

TEST_CASE("qtable json round trip")
{
    std::mt19937_64 gen(4);
    const auto grid = default_grid();
    const auto t = random_tuner(grid, gen, 0);
    CHECK(qtable_from_json(nlohmann::json::parse(qtable_to_json(t.table).dump())) == t.table);
}

TEST_CASE("snapshot save leaves no temporary files and replaces atomically")
{
    testing::TempDir dir;
    const auto spec = small_spec(5);
    const auto path = dir.path() / "run.json";
    const auto a = make_snapshot(spec, run_process(spec, 0).tuners);
    save_snapshot(a, path);
    auto spec2 = spec;
    spec2.iterations = 9;
    const auto b = make_snapshot(spec2, run_process(spec2, 0).tuners);
    save_snapshot(b, path);
    CHECK(read_snapshot(path) == b);
    std::size_t files = 0;
    for ([[maybe_unused]] const auto &e : std::filesystem::directory_iterator(dir.path()))
    {
        ++files;
    }
    CHECK(files == 1);
    CHECK_THROWS_AS(save_snapshot(a, dir.path() / "missing" / "x.json"), Error);
}

TEST_CASE("process snapshot path")
{
    CHECK(process_snapshot_path("run.json", 3) == std::filesystem::path("run-p3.json"));
    CHECK(process_snapshot_path("out/state", 0) == std::filesystem::path("out/state-p0"));
}

TEST_CASE("continue-mode split run equals the straight run")
{
    testing::TempDir dir;
    const auto straight_spec = small_spec(500);
    const auto straight = run_experiment(straight_spec);

    const auto first_spec = small_spec(250);
    const auto first = run_experiment(first_spec);
    const auto snap_path = dir.path() / "snap.json";
    save_snapshot(make_snapshot(first_spec, first.processes[0].tuners), process_snapshot_path(snap_path, 0));

    auto second_spec = small_spec(250);
    second_spec.restart_mode = RestartMode::Continue;
    RunOptions opts;
    opts.resume.push_back(load_snapshot(process_snapshot_path(snap_path, 0), RestartMode::Continue, second_spec, 0));
    CHECK(opts.resume[0].iterations_completed == 250);
    const auto second = run_experiment(second_spec, opts);

    const auto full = trajectory_csv(straight, straight_spec.grid);
    const auto a = trajectory_csv(first, first_spec.grid);
    const auto b = trajectory_csv(second, second_spec.grid);
    CHECK(full == a + b.substr(b.find('\n') + 1));
    CHECK(second.processes[0].tuners == straight.processes[0].tuners);
}

TEST_CASE("reset-iteration keeps every Q and stored energy, resets position")
{
    testing::TempDir dir;
    const auto spec = small_spec(200);
    const auto run = run_process(spec, 0);
    const auto path = dir.path() / "snap.json";
    save_snapshot(make_snapshot(spec, run.tuners), path);

    const auto restored = load_snapshot(path, RestartMode::ResetIteration, spec, 0);
    CHECK(restored.iterations_completed == 0);
    REQUIRE(restored.tuners.size() == run.tuners.tuners.size());
    const auto grid = spec.grid;
    for (const auto &[rts, tuner] : run.tuners.tuners)
    {
        const auto &r = restored.tuners.at(rts);
        CHECK(r.state == make_tuner_state(rts, spec.start));
        CHECK(r.state.step == 0);
        for (std::size_t f = 0; f < grid.size(); ++f)
        {
            const auto s = grid.state_at(f);
            for (auto a : valid_actions(grid, s))
            {
                const double x = tuner.table.q(s, a), y = r.table.q(s, a);
                CHECK(std::memcmp(&x, &y, sizeof x) == 0);
            }
            CHECK(r.table.last_energy(s) == tuner.table.last_energy(s));
        }
        CHECK(r.table == tuner.table);
        CHECK(tuner.state.step > 0);
    }
    const auto fresh = fresh_tuners(spec, 0);
    CHECK(restored.learner_rng == fresh.learner_rng);
    CHECK(restored.meter_rng == fresh.meter_rng);

    // greedy choices at explored states follow the learned values
    const auto &table = restored.tuners.begin()->second.table;
    LearnerConfig greedy = spec.learner;
    greedy.epsilon = 0;
    std::size_t differs = 0;
    const auto blank = init_qtable(grid, spec.start, spec.learner);
    for (const auto s : table.visited_states())
    {
        differs += greedy_action(table, s) != greedy_action(blank, s);
    }
    CHECK(differs > 0);
}

TEST_CASE("discard ignores the snapshot and matches a fresh run")
{
    testing::TempDir dir;
    auto spec = small_spec(60);
    const auto path = dir.path() / "snap.json";
    save_snapshot(make_snapshot(spec, run_process(spec, 0).tuners), path);
    spec.restart_mode = RestartMode::Discard;
    RunOptions opts;
    opts.resume.push_back(load_snapshot(path, RestartMode::Discard, spec, 0));
    CHECK(opts.resume[0] == fresh_tuners(spec, 0));
    CHECK(trajectory_csv(run_experiment(spec, opts), spec.grid) == trajectory_csv(run_experiment(spec), spec.grid));
    // not even read
    CHECK(load_snapshot(dir.path() / "nope.json", RestartMode::Discard, spec, 0) == fresh_tuners(spec, 0));
}

TEST_CASE("incompatible and corrupt snapshots")
{
    testing::TempDir dir;
    const auto spec = small_spec(20);
    const auto path = dir.path() / "snap.json";
    save_snapshot(make_snapshot(spec, run_process(spec, 0).tuners), path);

    auto other_grid = spec;
    other_grid.grid = make_grid(frequency_range(1.2, 2.5, 0.1), frequency_range(1.2, 2.9, 0.1));
    other_grid.regions[0].surface.shape = BowlSurface{1.2, 2.15, 100, 80, 60};
    CHECK(load_code(path, RestartMode::Continue, other_grid) == ErrorCode::IncompatibleSnapshot);
    auto other_learner = spec;
    other_learner.learner.alpha = 0.2;
    CHECK(load_code(path, RestartMode::ResetIteration, other_learner) == ErrorCode::IncompatibleSnapshot);

    auto j = nlohmann::json::parse(std::ifstream(path));
    j["format_version"] = 2;
    std::ofstream(dir.path() / "future.json") << j.dump();
    CHECK(load_code(dir.path() / "future.json", RestartMode::Continue, spec) == ErrorCode::CorruptSnapshot);

    std::ofstream(dir.path() / "trunc.json") << "{\"format_version\": 1, \"grid\": ";
    CHECK(load_code(dir.path() / "trunc.json", RestartMode::Continue, spec) == ErrorCode::CorruptSnapshot);

    j = nlohmann::json::parse(std::ifstream(path));
    j["rng"]["learner"] = "xorshift/1:5";
    std::ofstream(dir.path() / "rng.json") << j.dump();
    CHECK(load_code(dir.path() / "rng.json", RestartMode::Continue, spec) == ErrorCode::CorruptSnapshot);

    CHECK(load_code(dir.path() / "missing.json", RestartMode::Continue, spec) == ErrorCode::IoFailure);
}
