#pragma once

namespace rml {
inline constexpr const char* version = "0.1.0";
}
