#pragma once

namespace critfilt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace critfilt
