#pragma once

namespace scenefit {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace scenefit
