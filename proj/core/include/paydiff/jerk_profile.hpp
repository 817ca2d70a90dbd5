#pragma once

#include <optional>
#include <vector>

namespace paydiff {

struct ScalarLimits {
  double v_max = 1.0;
  double a_max = 1.0;
  double j_max = 1.0;
};

struct ScalarState {
  double x = 0.0;
  double v = 0.0;
  double a = 0.0;
  double j = 0.0;  // jerk active at this instant (right limit)
};

struct JerkSegment {
  double duration = 0.0;
  double jerk = 0.0;
};

/// Piecewise-constant-jerk motion of one axis, integrated exactly.
class JerkProfile {
 public:
  JerkProfile() = default;
  JerkProfile(ScalarState start, std::vector<JerkSegment> segments);

  double duration() const { return total_; }
  const ScalarState& start() const { return start_; }
  ScalarState end() const { return at(total_); }
  const std::vector<JerkSegment>& segments() const { return segments_; }

  /// State at time t; clamps t to [0, duration]. After the last segment the
  /// motion continues with zero jerk.
  ScalarState at(double t) const;

  /// Appends a zero-jerk segment so the profile lasts `duration`.
  void pad_to(double duration);

  /// Same motion played `factor` times slower: x(t / factor).
  JerkProfile time_scaled(double factor) const;

  /// Samples at t = 0, dt, 2 dt, ... up to and including the end.
  std::vector<ScalarState> sample(double dt) const;

 private:
  ScalarState start_;
  std::vector<JerkSegment> segments_;
  std::vector<double> t0_;
  std::vector<ScalarState> s0_;
  double total_ = 0.0;
};

/// Time-optimal seven-segment profile from (x0, v0, a0) to rest at x1
/// respecting |v| <= v_max, |a| <= a_max, |j| <= j_max. Requires |v0| <= v_max
/// and |a0| <= a_max. With `duration`, the profile is stretched to end exactly
/// then (cruise velocity lowered, or a final hold appended); throws
/// DomainError when `duration` is shorter than the time-optimal value.
JerkProfile jerk_limited_profile(const ScalarState& start, double x1, const ScalarLimits& limits,
                                 std::optional<double> duration = std::nullopt);

/// Minimum duration of `jerk_limited_profile(start, x1, limits)`.
double time_optimal_duration(const ScalarState& start, double x1, const ScalarLimits& limits);

}  // namespace paydiff
