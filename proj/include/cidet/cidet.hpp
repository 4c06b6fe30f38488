#pragma once

#include <cidet/bounds.hpp>
#include <cidet/ciglrt_l.hpp>
#include <cidet/ciglrt_nl.hpp>
#include <cidet/common.hpp>
#include <cidet/harness.hpp>
#include <cidet/io.hpp>
#include <cidet/network.hpp>
#include <cidet/rng.hpp>
#include <cidet/sensing.hpp>

namespace cidet {
inline constexpr const char* kVersion = "0.1.0";
}
