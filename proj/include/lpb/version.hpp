#pragma once

namespace lpb {

inline constexpr const char* kVersion = "lpb 0.1.0";

}  // namespace lpb
