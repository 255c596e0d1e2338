#pragma once

namespace refflow {

inline constexpr const char* kEngineName = "refflow";
inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace refflow
