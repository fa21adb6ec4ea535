#pragma once

namespace retroroute {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace retroroute
