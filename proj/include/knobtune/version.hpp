#pragma once

namespace knobtune {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace knobtune
