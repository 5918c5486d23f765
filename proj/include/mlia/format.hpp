#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace mlia {

/// Rounds half away from zero at `decimals` places. A relative nudge absorbs
/// binary representation error, so 0.085 (stored as 0.08499999...) rounds to 0.09.
inline double round_half_away(double x, int decimals) {
    const double scale = std::pow(10.0, decimals);
    const double scaled = std::abs(x) * scale;
    const double r = std::floor(scaled + 0.5 + 1e-9 * std::max(1.0, scaled));
    return std::copysign(r / scale, x);
}

/// Fixed-point text with half-away-from-zero rounding; never prints "-0.00".
inline std::string fixed(double x, int decimals = 2) {
    if (std::isnan(x)) return "NaN";
    double r = round_half_away(x, decimals);
    if (r == 0.0) r = 0.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, r);
    return buf;
}

/// Compact p-value text in the style of the appendix tables (4 significant digits).
inline std::string pvalue_text(double p) {
    if (std::isnan(p)) return "NaN";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", p);
    return buf;
}

}  // namespace mlia
