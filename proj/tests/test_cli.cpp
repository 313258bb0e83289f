#include "helpers.hpp"
#include "printers.hpp"

#include "cli.hpp"
#include "freqtune/report.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

using namespace freqtune;
namespace fs = std::filesystem;

namespace
{

struct Outcome
{
    int code = -1;
    std::string out;
    std::string err;
};

Outcome call(std::vector<std::string> args)
{
    std::ostringstream out, err;
    Outcome o;
    o.code = cli::run(args, out, err);
    o.out = out.str();
    o.err = err.str();
    return o;
}

std::string slurp(const fs::path &p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> split(const std::string &line)
{
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string item;
    while (std::getline(ss, item, ','))
    {
        out.push_back(item);
    }
    if (!line.empty() && line.back() == ',')
    {
        out.emplace_back();
    }
    return out;
}

} // namespace

TEST_CASE("run on the reference bowl spec writes all outputs")
{
    testing::TempDir dir;
    const auto r = call({"run", "--spec", testing::spec_path("fig2-replica.json").string(), "--out", dir.path().string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("savings") != std::string::npos);
    for (const char *f : {"trajectory.csv", "summary.json", "heatmap.csv"})
    {
        CHECK(fs::exists(dir.path() / f));
    }

    const auto summary = nlohmann::json::parse(slurp(dir.path() / "summary.json"));
    REQUIRE(summary["final_states"].size() == 1);
    const auto &fs0 = summary["final_states"][0];
    const int dc = std::abs(fs0["core_idx"].get<int>() - 0);
    const int du = std::abs(fs0["uncore_idx"].get<int>() - 9);
    CHECK(std::max(dc, du) <= 1);

    const auto csv = slurp(dir.path() / "trajectory.csv");
    CHECK(csv.substr(0, csv.find('\n')) == kTrajectoryHeader);
}

TEST_CASE("summary savings match a recomputation from the trajectory")
{
    testing::TempDir dir;
    const auto spec_file = testing::spec_path("multi-region.json").string();
    REQUIRE(call({"run", "--spec", spec_file, "--out", dir.path().string(), "--iterations", "40", "--quiet"}).code == 0);
    const auto summary = nlohmann::json::parse(slurp(dir.path() / "summary.json"));

    std::istringstream csv(slurp(dir.path() / "trajectory.csv"));
    std::string line;
    std::getline(csv, line);
    double tuned = 0;
    std::size_t rows = 0;
    while (std::getline(csv, line))
    {
        const auto cols = split(line);
        REQUIRE(cols.size() == 9);
        tuned += std::stod(cols[5]);
        ++rows;
    }
    CHECK(rows == 2 * 40 * 4);
    auto spec = testing::bundled("multi-region.json");
    spec.iterations = 40;
    const double baseline = spec.process_count * baseline_energy(spec);
    CHECK(summary["total_baseline_energy_j"].get<double>() == doctest::Approx(baseline).epsilon(1e-12));
    CHECK(std::abs(summary["savings_fraction"].get<double>() - (1.0 - tuned / baseline)) < 1e-9);
}

TEST_CASE("fixed seed gives byte-identical outputs")
{
    testing::TempDir a, b;
    const auto spec_file = testing::spec_path("multi-region.json").string();
    REQUIRE(call({"run", "--spec", spec_file, "--out", a.path().string(), "--seed", "42", "--quiet"}).code == 0);
    REQUIRE(call({"run", "--spec", spec_file, "--out", b.path().string(), "--seed", "42", "--quiet"}).code == 0);
    for (const char *f : {"trajectory.csv", "summary.json", "heatmap.csv"})
    {
        CHECK(slurp(a.path() / f) == slurp(b.path() / f));
    }
    testing::TempDir c;
    REQUIRE(call({"run", "--spec", spec_file, "--out", c.path().string(), "--seed", "43", "--quiet"}).code == 0);
    CHECK(slurp(a.path() / "trajectory.csv") != slurp(c.path() / "trajectory.csv"));
}

TEST_CASE("seed falls back to the environment")
{
    testing::TempDir a, b;
    const auto spec_file = testing::spec_path("fig2-replica.json").string();
    REQUIRE(call({"run", "--spec", spec_file, "--out", a.path().string(), "--seed", "7", "--quiet"}).code == 0);
    ::setenv("FREQTUNE_SEED", "7", 1);
    const auto r = call({"run", "--spec", spec_file, "--out", b.path().string(), "--quiet"});
    ::setenv("FREQTUNE_SEED", "seven", 1);
    const auto bad = call({"run", "--spec", spec_file, "--out", b.path().string(), "--quiet"});
    ::unsetenv("FREQTUNE_SEED");
    REQUIRE(r.code == 0);
    CHECK(slurp(a.path() / "trajectory.csv") == slurp(b.path() / "trajectory.csv"));
    CHECK(bad.code == 1);
}

TEST_CASE("config errors exit 1 and write nothing")
{
    testing::TempDir dir;
    const auto out = (dir.path() / "out").string();
    std::ofstream(dir.path() / "bad.json") << "{\"regions\": [";
    CHECK(call({"run", "--spec", (dir.path() / "bad.json").string(), "--out", out}).code == 1);
    CHECK(call({"run", "--spec", (dir.path() / "absent.json").string(), "--out", out}).code == 1);
    const auto spec_file = testing::spec_path("fig2-replica.json").string();
    const auto r = call({"run", "--spec", spec_file, "--out", out, "--alpha", "1.5"});
    CHECK(r.code == 1);
    CHECK(r.err.find("alpha") != std::string::npos);
    CHECK(call({"run", "--spec", spec_file, "--out", out, "--gamma", "1"}).code == 1);
    CHECK(call({"run", "--spec", spec_file, "--out", out, "--restart", "later"}).code == 1);
    CHECK(call({"run", "--spec", spec_file}).code == 1);
    CHECK(call({"frobnicate"}).code == 1);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("snapshots: continue resumes, incompatible snapshot is a config error")
{
    testing::TempDir dir;
    const auto spec_file = testing::spec_path("multi-region.json").string();
    const auto snap = (dir.path() / "snap.json").string();
    const auto out1 = (dir.path() / "a").string();
    const auto out2 = (dir.path() / "b").string();
    const auto straight = (dir.path() / "s").string();

    REQUIRE(call({"run", "--spec", spec_file, "--out", out1, "--iterations", "30", "--snapshot", snap, "--quiet"}).code == 0);
    CHECK(fs::exists(dir.path() / "snap-p0.json"));
    CHECK(fs::exists(dir.path() / "snap-p1.json"));
    REQUIRE(call({"run", "--spec", spec_file, "--out", out2, "--iterations", "30", "--snapshot", snap, "--restart",
                     "continue", "--quiet"})
                .code == 0);
    REQUIRE(call({"run", "--spec", spec_file, "--out", straight, "--iterations", "60", "--quiet"}).code == 0);

    // per-process rows are interleaved by process in the csv, compare process by process
    auto by_process = [](const std::string &csv) {
        std::map<std::string, std::string> out;
        std::istringstream in(csv);
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line))
        {
            out[split(line)[1]] += line + "\n";
        }
        return out;
    };
    auto a = by_process(slurp(fs::path(out1) / "trajectory.csv"));
    const auto b = by_process(slurp(fs::path(out2) / "trajectory.csv"));
    const auto s = by_process(slurp(fs::path(straight) / "trajectory.csv"));
    for (auto &[p, text] : a)
    {
        CHECK(text + b.at(p) == s.at(p));
    }

    const auto r = call({"run", "--spec", spec_file, "--out", out2, "--snapshot", snap, "--restart", "continue",
        "--alpha", "0.3", "--quiet"});
    CHECK(r.code == 1);
    CHECK(r.err.find("IncompatibleSnapshot") != std::string::npos);
}

TEST_CASE("sweep writes one row per value")
{
    testing::TempDir dir;
    const auto spec_file = testing::spec_path("fig2-replica.json").string();
    REQUIRE(call({"sweep", "--spec", spec_file, "--out", dir.path().string(), "--param", "epsilon", "--values",
                     "0,0.25,0.5", "--iterations", "60", "--quiet"})
                .code == 0);
    std::istringstream csv(slurp(dir.path() / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    CHECK(line == "value,savings,steps_to_convergence");
    std::vector<std::string> values;
    while (std::getline(csv, line))
    {
        values.push_back(split(line)[0]);
    }
    CHECK(values == std::vector<std::string>{"0", "0.25", "0.5"});
}

TEST_CASE("greedy learner falls into the trap more often than an exploring one")
{
    testing::TempDir dir;
    const auto spec_file = testing::spec_path("trap.json").string();
    REQUIRE(call({"sweep", "--spec", spec_file, "--out", dir.path().string(), "--values", "0,0.25", "--seeds", "50",
                     "--quiet"})
                .code == 0);
    std::istringstream csv(slurp(dir.path() / "sweep.csv"));
    std::string line;
    std::getline(csv, line);
    std::getline(csv, line);
    const double greedy = std::stod(split(line)[1]);
    std::getline(csv, line);
    const double exploring = std::stod(split(line)[1]);
    CHECK(greedy < exploring);
}

TEST_CASE("sweep argument errors")
{
    testing::TempDir dir;
    const auto spec_file = testing::spec_path("fig2-replica.json").string();
    const auto out = (dir.path() / "o").string();
    CHECK(call({"sweep", "--spec", spec_file, "--out", out, "--values", ""}).code == 1);
    CHECK(call({"sweep", "--spec", spec_file, "--out", out}).code == 1);
    CHECK(call({"sweep", "--spec", spec_file, "--out", out, "--values", "0.1,x"}).code == 1);
    CHECK(call({"sweep", "--spec", spec_file, "--out", out, "--param", "gamma", "--values", "0.5,1.0"}).code == 1);
    CHECK(call({"sweep", "--spec", spec_file, "--out", out, "--param", "delta", "--values", "0.5"}).code == 1);
    CHECK_FALSE(fs::exists(out));
}

TEST_CASE("oracle prints optimum and savings bound")
{
    auto r = call({"oracle", "--spec", testing::spec_path("fig2-replica.json").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find("main/solve,0,1.2,2.1,") != std::string::npos);

    testing::TempDir dir;
    auto spec = testing::bundled("fig2-replica.json");
    spec.regions[0].surface.shape = TableSurface{std::vector<std::vector<double>>(14, std::vector<double>(19, 50.0))};
    std::ofstream(dir.path() / "flat.json") << spec_to_json(spec).dump();
    r = call({"oracle", "--spec", (dir.path() / "flat.json").string()});
    REQUIRE(r.code == 0);
    CHECK(r.out.find(",0\n") != std::string::npos);
    const auto oracles = region_oracles(spec);
    CHECK(oracles[0].savings_bound == 0.0);

    CHECK(call({"oracle", "--spec", (dir.path() / "none.json").string()}).code == 1);
}
