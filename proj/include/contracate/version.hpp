#pragma once

namespace contracate {
inline constexpr const char* kVersion = "0.1.0";
}
