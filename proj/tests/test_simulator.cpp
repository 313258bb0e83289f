#include "helpers.hpp"
#include "printers.hpp"

#include "freqtune/errors.hpp"
#include "freqtune/report.hpp"
#include "freqtune/simulator.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

using namespace freqtune;

namespace
{

double row_sum(const ExperimentResult &r)
{
    double sum = 0;
    for (const auto &p : r.processes)
    {
        for (const auto &row : p.rows)
        {
            sum += row.energy_j;
        }
    }
    return sum;
}

ExperimentSpec frozen(ExperimentSpec spec)
{
    spec.learner.alpha = 0.0;
    spec.learner.epsilon = 0.0;
    spec.learner.stay_bias = 0.1;
    spec.meter.noise_sigma_rel = 0.0;
    return spec;
}

} // namespace

TEST_CASE("closed loop on the reference bowl ends next to the optimum")
{
    auto spec = testing::bundled("fig2-replica.json");
    REQUIRE(spec.iterations == 200);
    const auto opt = optimum_state(spec.regions[0].surface, spec.grid, spec.meter.static_offset_w).state;
    int near = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
    {
        spec.master_seed = seed;
        const auto r = run_experiment(spec);
        REQUIRE(r.final_states.size() == 1);
        near += grid_distance(r.final_states[0].modal, opt) <= 1;
    }
    CHECK(near >= 9);
}

TEST_CASE("frozen learner never leaves the start state")
{
    auto spec = frozen(testing::bundled("fig2-replica.json"));
    spec.iterations = 50;
    const auto r = run_experiment(spec);
    std::size_t untuned = 0;
    for (const auto &row : r.processes[0].rows)
    {
        if (row.kind == RowKind::Untuned)
        {
            // the region runs at the default state until it becomes a candidate
            CHECK(row.state == spec.default_state);
            ++untuned;
        }
        else
        {
            CHECK(row.state == spec.start);
        }
    }
    CHECK(untuned == 2);
    const double per = noiseless_energy_j(spec.regions[0].surface, spec.start, spec.grid, 70.0);
    const double dflt = noiseless_energy_j(spec.regions[0].surface, spec.default_state, spec.grid, 70.0);
    CHECK(r.tuned_energy_j == doctest::Approx(per * 48 + dflt * 2).epsilon(1e-12));

    spec.default_state = spec.start;
    CHECK(run_experiment(spec).tuned_energy_j == doctest::Approx(per * 50).epsilon(1e-12));
}

TEST_CASE("a negative stay bias makes even a frozen learner move off the start")
{
    auto spec = frozen(testing::bundled("fig2-replica.json"));
    spec.learner.stay_bias = -0.1;
    spec.iterations = 10;
    const auto r = run_experiment(spec);
    const auto &rows = r.processes[0].rows;
    CHECK(std::any_of(rows.begin(), rows.end(), [&](const auto &row) { return row.state != spec.start; }));
}

TEST_CASE("after convergence the greedy learner stays at the minimum")
{
    auto spec = testing::bundled("fig2-replica.json");
    spec.meter.noise_sigma_rel = 0.0;
    spec.iterations = 500;
    const auto trained = run_process(spec, 0);

    spec.learner.epsilon = 0.0;
    spec.iterations = 100;
    const auto r = run_process(spec, 0, trained.tuners);
    const auto opt = optimum_state(spec.regions[0].surface, spec.grid, 70.0).state;
    REQUIRE(r.rows.size() == 100);
    for (std::size_t i = r.rows.size() - 50; i < r.rows.size(); ++i)
    {
        REQUIRE(r.rows[i].record);
        CHECK(r.rows[i].state == opt);
        CHECK(r.rows[i].record->action.is_stay());
    }
    CHECK(greedy_action(r.tuners.tuners.begin()->second.table, opt) == kStay);
}

TEST_CASE("a greedy learner always ends in a fixed point")
{
    auto spec = testing::bundled("fig2-replica.json");
    spec.learner.epsilon = 0.0;
    spec.meter.noise_sigma_rel = 0.0;
    spec.iterations = 300;
    const auto rows = run_process(spec, 0).rows;
    for (std::size_t i = rows.size() - 20; i < rows.size(); ++i)
    {
        CHECK(rows[i].state == rows.back().state);
    }
}

TEST_CASE("processes with the same seed derivation are reproducible")
{
    auto spec = testing::bundled("multi-region.json");
    spec.process_count = 4;
    spec.iterations = 40;
    const auto a = run_experiment(spec);
    RunOptions par;
    par.workers = 4;
    const auto b = run_experiment(spec, par);
    CHECK(trajectory_csv(a, spec.grid) == trajectory_csv(b, spec.grid));
    for (std::size_t p = 0; p < 4; ++p)
    {
        CHECK(run_process(spec, p) == a.processes[p]);
        CHECK(a.processes[p] == b.processes[p]);
    }
    CHECK(a.processes[0].rows != a.processes[1].rows);
}

TEST_CASE("per-process results do not depend on process order or count")
{
    auto spec = testing::bundled("multi-region.json");
    spec.iterations = 30;
    spec.process_count = 5;
    const auto all = run_experiment(spec);
    std::vector<std::size_t> order{4, 2, 0, 3, 1};
    for (auto p : order)
    {
        CHECK(run_process(spec, p) == all.processes[p]);
    }
    spec.process_count = 2;
    const auto fewer = run_experiment(spec);
    CHECK(fewer.processes[1] == all.processes[1]);
}

TEST_CASE("baseline arithmetic")
{
    const auto grid = default_grid();
    TableSurface flat{std::vector<std::vector<double>>(14, std::vector<double>(19, 30.0))};
    auto spec = testing::single_region(flat, 100, {0, 0}, {0, 0});
    CHECK(baseline_energy(spec) == doctest::Approx(10000.0).epsilon(1e-12));
    spec.iterations = 0;
    CHECK(baseline_energy(spec) == 0.0);
}

TEST_CASE("pinned run equals the baseline")
{
    auto spec = frozen(testing::bundled("savings.json"));
    spec.iterations = 100;
    REQUIRE(spec.start == spec.default_state);
    const auto r = run_experiment(spec);
    CHECK(r.tuned_energy_j == doctest::Approx(r.baseline_energy_j).epsilon(1e-12));
    CHECK(std::abs(r.savings_fraction) < 1e-12);
    CHECK(r.runtime_overhead_fraction == doctest::Approx(0.0));
}

TEST_CASE("savings fraction and energy accounting")
{
    auto spec = testing::bundled("multi-region.json");
    spec.iterations = 60;
    const auto r = run_experiment(spec);
    CHECK(r.savings_fraction == doctest::Approx(1.0 - r.tuned_energy_j / r.baseline_energy_j).epsilon(1e-12));
    CHECK(r.baseline_energy_j == doctest::Approx(spec.process_count * baseline_energy(spec)).epsilon(1e-12));
    CHECK(row_sum(r) == doctest::Approx(r.tuned_energy_j).epsilon(1e-12));
    double per_process = 0;
    for (const auto &p : r.processes)
    {
        per_process += p.energy_j;
    }
    CHECK(per_process == doctest::Approx(r.tuned_energy_j).epsilon(1e-12));
}

TEST_CASE("short regions never get tuners; long ones start after their second call")
{
    auto spec = testing::bundled("multi-region.json");
    spec.process_count = 1;
    spec.iterations = 20;
    const auto r = run_experiment(spec);
    std::set<std::string> tuned;
    for (const auto &[rts, t] : r.processes[0].tuners.tuners)
    {
        tuned.insert(rts.str());
    }
    CHECK(tuned == std::set<std::string>{"main/timestep/rhs", "main/timestep/solver=cg/sweep"});

    std::vector<RowKind> rhs;
    for (const auto &row : r.processes[0].rows)
    {
        if (row.rts.str() == "main/timestep/rhs")
        {
            rhs.push_back(row.kind);
        }
        if (row.rts.str() == "main/io" || row.rts.str() == "main/timestep/halo")
        {
            CHECK(row.kind == RowKind::Untuned);
        }
    }
    REQUIRE(rhs.size() == 20);
    CHECK(rhs[0] == RowKind::Untuned);
    CHECK(rhs[1] == RowKind::Untuned);
    CHECK(rhs[2] == RowKind::Initial);
    CHECK(rhs[3] == RowKind::Step);
}

TEST_CASE("untuned invocations run at the default state")
{
    auto spec = testing::bundled("multi-region.json");
    spec.iterations = 3;
    for (const auto &row : run_process(spec, 0).rows)
    {
        if (row.kind == RowKind::Untuned)
        {
            CHECK(row.state == spec.default_state);
        }
    }
}

TEST_CASE("savings do not change when all durations scale")
{
    auto spec = testing::bundled("multi-region.json");
    spec.meter.noise_sigma_rel = 0.0;
    spec.candidate_threshold_ms = 100.0;
    spec.iterations = 50;
    const auto a = run_experiment(spec);
    for (auto &reg : spec.regions)
    {
        reg.surface.runtime.base_ms *= 3.0;
    }
    spec.candidate_threshold_ms *= 3.0;
    const auto b = run_experiment(spec);
    CHECK(b.savings_fraction == doctest::Approx(a.savings_fraction).epsilon(1e-9));
    CHECK(b.tuned_energy_j == doctest::Approx(3.0 * a.tuned_energy_j).epsilon(1e-9));
}

TEST_CASE("swapping in an identical surface changes nothing")
{
    auto spec = testing::bundled("fig2-replica.json");
    const auto plain = run_experiment(spec);
    spec.phase_changes.push_back(PhaseChange{100, 0, spec.regions[0].surface.shape});
    CHECK(trajectory_csv(run_experiment(spec), spec.grid) == trajectory_csv(plain, spec.grid));
    CHECK_THROWS_AS(phase_change_response(spec), Error);
}

TEST_CASE("phase change response")
{
    auto spec = testing::bundled("phase-change.json");
    const auto oracles = region_oracles(spec);
    REQUIRE(oracles.size() == 2);
    CHECK(grid_distance(oracles[0].optimum.state, oracles[1].optimum.state) >= 3);
    int near = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed)
    {
        spec.master_seed = seed;
        const auto r = phase_change_response(spec);
        near += grid_distance(r.final_states[0].modal, oracles[1].optimum.state) <= 1;
    }
    CHECK(near >= 7);

    SUBCASE("greedy learner also adapts")
    {
        spec.learner.epsilon = 0.0;
        int adapted = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed)
        {
            spec.master_seed = seed;
            const auto g = phase_change_response(spec);
            const auto &rows = g.processes[0].rows;
            const auto before = modal_state(std::span(rows.data(), 250), rows[0].rts, 0.2);
            adapted += grid_distance(*before, oracles[0].optimum.state) <= 1 &&
                       grid_distance(g.final_states[0].modal, oracles[1].optimum.state) <= 1;
        }
        CHECK(adapted >= 7);
    }

    auto too_small = spec;
    too_small.phase_changes[0].shape = BowlSurface{1.3, 2.2, 100, 80, 60};
    CHECK_THROWS_AS(phase_change_response(too_small), Error);
}

TEST_CASE("surfaces_at applies phase changes from their iteration on")
{
    const auto spec = testing::bundled("phase-change.json");
    CHECK(surfaces_at(spec, 249)[0] == spec.regions[0].surface);
    CHECK(surfaces_at(spec, 250)[0].shape == spec.phase_changes[0].shape);
    CHECK(surfaces_at(spec, 499)[0].runtime == spec.regions[0].surface.runtime);
}

TEST_CASE("modal state and first hit helpers")
{
    const auto rts = RtsId::parse("main/solve");
    std::vector<TrajectoryRow> rows;
    auto push = [&](RowKind k, ConfigState s, std::uint64_t step) {
        TrajectoryRow row;
        row.rts = rts;
        row.kind = k;
        row.state = s;
        if (k == RowKind::Step)
        {
            row.record = StepRecord{};
            row.record->step = step;
            row.record->state_after = s;
        }
        rows.push_back(row);
    };
    push(RowKind::Initial, {9, 9}, 0);
    for (std::uint64_t i = 1; i <= 9; ++i)
    {
        push(RowKind::Step, {int(9 - i), 9}, i);
    }
    push(RowKind::Step, {1, 9}, 10);
    CHECK(first_step_within(rows, rts, {0, 9}) == 8u);
    CHECK(first_step_within(rows, rts, {9, 9}) == 0u);
    CHECK_FALSE(first_step_within(rows, rts, {0, 0}));
    // last 20% of 11 rows covers the final 3: (1,9) twice, (0,9) once
    CHECK(modal_state(rows, rts) == ConfigState{1, 9});
    CHECK_FALSE(modal_state(rows, RtsId::parse("main/other")));
}
