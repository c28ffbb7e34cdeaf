#pragma once

namespace covsem {

inline constexpr const char* kVersion = "covsem 0.1.0";

}  // namespace covsem
