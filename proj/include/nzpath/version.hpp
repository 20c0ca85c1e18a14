#pragma once

namespace nzpath {

inline constexpr const char* kToolName = "nzpath";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace nzpath
