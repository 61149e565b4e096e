#pragma once

namespace dak {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace dak
