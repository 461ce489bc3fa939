#pragma once

namespace mdgp {

inline constexpr const char* kToolName = "mdgp";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace mdgp
