#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace pplprompt {

/// Fixed six-decimal rendering used for every human- and golden-file-facing number.
inline std::string fixed6(double value) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.6f", value);
    return buffer;
}

/// Rounds to six decimals so JSON serialization of CLI records is stable.
inline double round6(double value) { return std::round(value * 1e6) / 1e6; }

}  // namespace pplprompt
