#pragma once

namespace vicntm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace vicntm
