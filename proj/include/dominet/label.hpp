#pragma once

#include <cstdint>

namespace dominet {

/// Class of a unit. Dominant is the positive class throughout.
enum class Label : std::uint8_t { Follower = 0, Dominant = 1 };

}  // namespace dominet
