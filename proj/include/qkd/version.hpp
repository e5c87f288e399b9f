#pragma once

namespace qkd {

inline constexpr const char* kToolName = "qkdrate";
inline constexpr const char* kVersion = "1.0.0";

}  // namespace qkd
