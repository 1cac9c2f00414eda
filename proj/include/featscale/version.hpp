#pragma once

namespace featscale {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace featscale
