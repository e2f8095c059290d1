#pragma once

namespace snnid::cli {

#ifdef SNNID_VERSION
inline constexpr const char* kVersion = SNNID_VERSION;
#else
inline constexpr const char* kVersion = "0.1.0";
#endif

}  // namespace snnid::cli
