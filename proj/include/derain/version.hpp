#pragma once

namespace derain {

inline constexpr const char* kVersion = "1.0.0";

} // namespace derain
