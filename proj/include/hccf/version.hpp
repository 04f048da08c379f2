#pragma once

namespace hccf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace hccf
