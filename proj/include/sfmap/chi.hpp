#pragma once

#include <cmath>
#include <string>

namespace sfmap {

enum class ChiKind { Polynomial, SmoothBump };

/// Radial profile chi: [0, inf) -> [0, 1] with chi(0) = 1 and chi(t) = 0 for t >= 1.
struct ChiProfile {
    ChiKind kind = ChiKind::Polynomial;

    double operator()(double t) const
    {
        if (t >= 1.0) return 0.0;
        if (t <= 0.0) return 1.0;
        switch (kind) {
        case ChiKind::Polynomial: return 1.0 - 3.0 * t * t + 2.0 * t * t * t;
        case ChiKind::SmoothBump: return std::exp(1.0 - 1.0 / (1.0 - t * t));
        }
        return 0.0;
    }
};

inline double eval_chi(ChiProfile profile, double t) { return profile(t); }

inline const char* to_string(ChiKind kind) { return kind == ChiKind::Polynomial ? "poly" : "bump"; }

} // namespace sfmap
