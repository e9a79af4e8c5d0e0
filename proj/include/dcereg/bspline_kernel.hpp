#pragma once

#include <array>
#include <cmath>

namespace dcereg {

/// Centered cubic B-spline basis function.
inline double bspline3(double x) {
    const double a = std::abs(x);
    if (a < 1.0) {
        return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
    }
    if (a < 2.0) {
        const double b = 2.0 - a;
        return b * b * b / 6.0;
    }
    return 0.0;
}

inline double bspline3_derivative(double x) {
    const double a = std::abs(x);
    const double s = x < 0.0 ? -1.0 : 1.0;
    if (a < 1.0) {
        return s * (-2.0 * a + 1.5 * a * a);
    }
    if (a < 2.0) {
        const double b = 2.0 - a;
        return -s * 0.5 * b * b;
    }
    return 0.0;
}

/// Weights of the four cubic B-spline taps at floor(u)-1 .. floor(u)+2.
struct CubicTaps {
    int first = 0;
    std::array<double, 4> w{};
    std::array<double, 4> dw{};
};

inline CubicTaps cubic_taps(double u) {
    CubicTaps taps;
    const double fl = std::floor(u);
    const double t = u - fl;
    const double t2 = t * t;
    const double t3 = t2 * t;
    const double omt = 1.0 - t;
    taps.first = static_cast<int>(fl) - 1;
    taps.w = {omt * omt * omt / 6.0, (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
              (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0, t3 / 6.0};
    taps.dw = {-0.5 * omt * omt, 0.5 * (3.0 * t2 - 4.0 * t), 0.5 * (-3.0 * t2 + 2.0 * t + 1.0), 0.5 * t2};
    return taps;
}

}  // namespace dcereg
