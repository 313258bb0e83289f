#pragma once

#include "freqtune/freqspace.hpp"

#include <doctest.h>

#include <string>

namespace doctest
{

template <>
struct StringMaker<freqtune::ConfigState>
{
    static String convert(const freqtune::ConfigState &s)
    {
        return ("(" + std::to_string(s.core_idx) + "," + std::to_string(s.uncore_idx) + ")").c_str();
    }
};

template <>
struct StringMaker<freqtune::ActionDelta>
{
    static String convert(const freqtune::ActionDelta &a)
    {
        return ("[" + std::to_string(a.core_delta) + "," + std::to_string(a.uncore_delta) + "]").c_str();
    }
};

} // namespace doctest
