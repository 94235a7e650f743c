#pragma once

namespace docmt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace docmt
