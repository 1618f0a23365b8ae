#pragma once

namespace pgc {

inline constexpr const char* kToolVersion = "pgc 0.1.0";

}  // namespace pgc
