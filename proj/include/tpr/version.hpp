#pragma once

namespace tpr {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace tpr
