#pragma once

namespace pcnas {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pcnas
