#pragma once

namespace graphevo {

inline constexpr const char* kToolVersion = "1.0.0";

} // namespace graphevo
