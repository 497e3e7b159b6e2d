#pragma once

namespace caustic {

inline constexpr const char* version_string = "caustic 0.1.0";

} // namespace caustic
