#pragma once

namespace dlmp {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kSolverName = "dlmp-hsde";  // built-in homogeneous self-dual interior point
inline constexpr const char* kSolverVersion = "0.1.0";

}  // namespace dlmp
