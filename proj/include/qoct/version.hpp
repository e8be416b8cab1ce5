#pragma once

namespace qoct {
inline constexpr const char* kVersion = "0.1.0";
}
