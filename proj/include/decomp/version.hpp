#pragma once

namespace decomp {

inline constexpr const char *version = "0.1.0";

} // namespace decomp
