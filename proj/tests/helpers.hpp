#pragma once

#include "freqtune/experiment.hpp"
#include "freqtune/simulator.hpp"

#include <filesystem>
#include <random>
#include <string>

namespace testing
{

inline std::filesystem::path spec_path(const std::string &name)
{
    return std::filesystem::path(FREQTUNE_SPEC_DIR) / name;
}

inline freqtune::ExperimentSpec bundled(const std::string &name)
{
    return freqtune::load_spec(spec_path(name));
}

/// One region on the default grid; noise and offset as given.
inline freqtune::ExperimentSpec single_region(freqtune::PowerShape shape, std::uint64_t iterations,
    freqtune::ConfigState start, freqtune::ConfigState default_state, double duration_ms = 1000.0)
{
    freqtune::ExperimentSpec spec;
    freqtune::RegionSpec r;
    r.path = freqtune::RtsId::parse("main/solve");
    r.surface.shape = std::move(shape);
    r.surface.runtime.base_ms = duration_ms;
    spec.regions.push_back(r);
    spec.iterations = iterations;
    spec.start = start;
    spec.default_state = default_state;
    return spec;
}

/// Scratch directory removed on scope exit.
class TempDir
{
public:
    TempDir()
    {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("freqtune-test-" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const std::filesystem::path &path() const
    {
        return path_;
    }

private:
    std::filesystem::path path_;
};

} // namespace testing
