#pragma once

namespace cpi {

inline constexpr const char* kVersion = "cpi-0.1.0";

} // namespace cpi
