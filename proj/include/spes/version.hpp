#pragma once

namespace spes {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spes
