#pragma once

#include "paydiff/dynamics.hpp"

namespace oracle {

// Largest payload on a fine mass grid for which the torque limits hold. The
// feasible set is an interval starting at 0, so scanning coarse then fine
// gives the same answer as a full fine scan.
inline double grid_max_payload(const paydiff::RobotModel& m, const paydiff::Trajectory& t, double step = 1e-4) {
  using paydiff::kPayloadCap;
  double lo = 0.0;
  const double coarse = 0.05;
  while (lo + coarse <= kPayloadCap && paydiff::validate_torques(m, t, lo + coarse).feasible) lo += coarse;
  double x = lo;
  while (x + step <= kPayloadCap + 1e-12 && paydiff::validate_torques(m, t, x + step).feasible) x += step;
  return x;
}

}  // namespace oracle
