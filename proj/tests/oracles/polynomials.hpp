#pragma once

#include <array>

namespace oracle {

// Rest-to-rest quintic x(t) = x0 + d (10 s^3 - 15 s^4 + 6 s^5), s = t / T.
struct Quintic {
  double x0 = 0.0, d = 1.0, T = 1.0;

  std::array<double, 4> at(double t) const {
    const double s = t / T;
    const double x = x0 + d * (10 * s * s * s - 15 * s * s * s * s + 6 * s * s * s * s * s);
    const double v = d / T * (30 * s * s - 60 * s * s * s + 30 * s * s * s * s);
    const double a = d / (T * T) * (60 * s - 180 * s * s + 120 * s * s * s);
    const double j = d / (T * T * T) * (60 - 360 * s + 360 * s * s);
    return {x, v, a, j};
  }

  // Integral of squared jerk over [0, T]: 720 d^2 / T^5.
  double jerk_cost() const { return 720.0 * d * d / (T * T * T * T * T); }
};

}  // namespace oracle
