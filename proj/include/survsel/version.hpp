#pragma once

namespace survsel {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace survsel
