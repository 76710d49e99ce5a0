#pragma once

namespace sfpe {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sfpe
