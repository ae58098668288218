#pragma once

namespace fastsir {

inline constexpr const char* kVersion = "0.1.0";

} // namespace fastsir
