#pragma once

namespace extremis {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace extremis
