#pragma once

namespace sparsechan {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sparsechan
