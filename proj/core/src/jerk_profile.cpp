#include "paydiff/jerk_profile.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "paydiff/common.hpp"

namespace paydiff {

namespace {

ScalarState integrate(const ScalarState& s, double T, double jerk) {
  ScalarState o;
  o.x = s.x + s.v * T + s.a * T * T / 2.0 + jerk * T * T * T / 6.0;
  o.v = s.v + s.a * T + jerk * T * T / 2.0;
  o.a = s.a + jerk * T;
  o.j = jerk;
  return o;
}

void push(std::vector<JerkSegment>& segs, double duration, double jerk) {
  if (duration > 0.0) segs.push_back({duration, jerk});
}

// Fastest jerk-limited change from (v0, a0) to (vp, 0).
void velocity_change(double v0, double a0, double vp, double a_max, double j_max, std::vector<JerkSegment>& out) {
  const double v_stop = v0 + a0 * std::abs(a0) / (2.0 * j_max);
  const double sign = vp >= v_stop ? 1.0 : -1.0;
  const double V0 = sign * v0, A0 = sign * a0, VP = sign * vp;
  double ap = std::sqrt(std::max(0.0, j_max * (VP - V0) + A0 * A0 / 2.0));
  ap = std::max(ap, std::max(A0, 0.0));
  double plateau = 0.0;
  if (ap > a_max) {
    ap = a_max;
    plateau = std::max(0.0, (VP - V0 - (2.0 * a_max * a_max - A0 * A0) / (2.0 * j_max)) / a_max);
  }
  push(out, (ap - A0) / j_max, sign * j_max);
  push(out, plateau, 0.0);
  push(out, ap / j_max, -sign * j_max);
}

double end_position(const ScalarState& start, const std::vector<JerkSegment>& segs) {
  ScalarState s = start;
  for (const auto& g : segs) s = integrate(s, g.duration, g.jerk);
  return s.x;
}

double total_duration(const std::vector<JerkSegment>& segs) {
  double t = 0.0;
  for (const auto& g : segs) t += g.duration;
  return t;
}

// Accelerate to a peak velocity, optionally cruise, decelerate to rest.
std::vector<JerkSegment> peak_profile(const ScalarState& start, double x1, const ScalarLimits& lim) {
  const double vmax = lim.v_max;
  auto build = [&](double vp, double cruise) {
    std::vector<JerkSegment> segs;
    velocity_change(start.v, start.a, vp, lim.a_max, lim.j_max, segs);
    push(segs, cruise, 0.0);
    velocity_change(vp, 0.0, 0.0, lim.a_max, lim.j_max, segs);
    return segs;
  };
  const double x_hi = end_position(start, build(vmax, 0.0));
  if (x1 >= x_hi) return build(vmax, (x1 - x_hi) / vmax);
  const double x_lo = end_position(start, build(-vmax, 0.0));
  if (x1 <= x_lo) return build(-vmax, (x_lo - x1) / vmax);
  double lo = -vmax, hi = vmax;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * vmax; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (end_position(start, build(mid, 0.0)) < x1) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return build(0.5 * (lo + hi), 0.0);
}

// Single braking phase that comes to rest exactly at x1 (only when moving
// toward x1 and the peak profile would undershoot then reverse).
std::optional<std::vector<JerkSegment>> braking_profile(const ScalarState& start, double x1, const ScalarLimits& lim) {
  const double dir = start.v > 0.0 ? 1.0 : (start.v < 0.0 ? -1.0 : 0.0);
  if (dir == 0.0) return std::nullopt;
  const double V0 = dir * start.v, A0 = dir * start.a, D = dir * (x1 - start.x);
  const double j = lim.j_max;
  const double hi = std::min(lim.a_max, std::sqrt(std::max(0.0, j * V0 + A0 * A0 / 2.0)));
  const double lo = std::max(-A0, 0.0);
  if (!(hi > lo) || hi <= 0.0) return std::nullopt;
  auto build = [&](double ap) {
    std::vector<JerkSegment> segs;
    push(segs, (A0 + ap) / j, -dir * j);
    push(segs, std::max(0.0, (V0 + A0 * A0 / (2.0 * j) - ap * ap / j) / ap), 0.0);
    push(segs, ap / j, dir * j);
    return segs;
  };
  auto dist = [&](double ap) { return dir * (end_position(start, build(ap)) - start.x); };
  const double d_min = dist(hi);
  const double a_floor = std::max(lo, 1e-9 * lim.a_max);
  const double d_max = dist(a_floor);
  if (D < d_min || D > d_max) return std::nullopt;
  double a = a_floor, b = hi;  // dist decreasing in ap
  for (int it = 0; it < 200 && b - a > 1e-15 * lim.a_max; ++it) {
    const double mid = 0.5 * (a + b);
    if (dist(mid) > D) {
      a = mid;
    } else {
      b = mid;
    }
  }
  return build(0.5 * (a + b));
}

std::vector<JerkSegment> optimal_segments(const ScalarState& start, double x1, const ScalarLimits& lim) {
  if (!(lim.v_max > 0.0 && lim.a_max > 0.0 && lim.j_max > 0.0)) throw DomainError("jerk profile: limits must be > 0");
  if (std::abs(start.v) > lim.v_max * (1.0 + 1e-9) || std::abs(start.a) > lim.a_max * (1.0 + 1e-9)) {
    throw DomainError("jerk profile: initial state outside velocity/acceleration limits");
  }
  if (start.v == 0.0 && start.a == 0.0 && x1 == start.x) return {};
  std::vector<JerkSegment> best = peak_profile(start, x1, lim);
  if (auto brake = braking_profile(start, x1, lim)) {
    if (total_duration(*brake) < total_duration(best)) best = std::move(*brake);
  }
  return best;
}

}  // namespace

JerkProfile::JerkProfile(ScalarState start, std::vector<JerkSegment> segments)
    : start_(start), segments_(std::move(segments)) {
  ScalarState s = start_;
  double t = 0.0;
  for (const auto& g : segments_) {
    t0_.push_back(t);
    s.j = g.jerk;
    s0_.push_back(s);
    s = integrate(s, g.duration, g.jerk);
    t += g.duration;
  }
  total_ = t;
}

ScalarState JerkProfile::at(double t) const {
  if (segments_.empty()) {
    ScalarState s = start_;
    const double tt = std::max(0.0, t);
    s = integrate(s, tt, 0.0);
    s.j = 0.0;
    return s;
  }
  t = std::max(0.0, t);
  if (t >= total_) {
    ScalarState e = integrate(s0_.back(), segments_.back().duration, segments_.back().jerk);
    e = integrate(e, t - total_, 0.0);
    e.j = 0.0;
    return e;
  }
  const auto it = std::upper_bound(t0_.begin(), t0_.end(), t);
  const std::size_t k = static_cast<std::size_t>(std::distance(t0_.begin(), it)) - 1;
  ScalarState s = integrate(s0_[k], t - t0_[k], segments_[k].jerk);
  s.j = segments_[k].jerk;
  return s;
}

void JerkProfile::pad_to(double duration) {
  if (duration > total_) {
    auto segs = segments_;
    segs.push_back({duration - total_, 0.0});
    *this = JerkProfile(start_, std::move(segs));
  }
}

JerkProfile JerkProfile::time_scaled(double factor) const {
  if (!(factor > 0.0)) throw DomainError("time_scaled: factor must be > 0");
  ScalarState s = start_;
  s.v /= factor;
  s.a /= factor * factor;
  s.j /= factor * factor * factor;
  std::vector<JerkSegment> segs;
  segs.reserve(segments_.size());
  for (const auto& g : segments_) segs.push_back({g.duration * factor, g.jerk / (factor * factor * factor)});
  return JerkProfile(s, std::move(segs));
}

std::vector<ScalarState> JerkProfile::sample(double dt) const {
  if (!(dt > 0.0)) throw DomainError("sample: dt must be > 0");
  const auto n = static_cast<std::size_t>(std::ceil(total_ / dt - 1e-9)) + 1;
  std::vector<ScalarState> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(at(static_cast<double>(k) * dt));
  return out;
}

double time_optimal_duration(const ScalarState& start, double x1, const ScalarLimits& limits) {
  return total_duration(optimal_segments(start, x1, limits));
}

JerkProfile jerk_limited_profile(const ScalarState& start, double x1, const ScalarLimits& limits,
                                 std::optional<double> duration) {
  ScalarState s0 = start;
  s0.j = 0.0;
  std::vector<JerkSegment> segs = optimal_segments(s0, x1, limits);
  const double t_opt = total_duration(segs);
  if (!duration) return JerkProfile(s0, std::move(segs));

  const double T = *duration;
  if (T < t_opt - 1e-9 * std::max(1.0, t_opt)) {
    throw DomainError("jerk_limited_profile: duration " + std::to_string(T) + " s is shorter than the time-optimal " +
                      std::to_string(t_opt) + " s");
  }
  if (T > t_opt + 1e-12 && segs.size() > 0) {
    // Lower the cruise velocity until the motion takes T.
    const double v_stop = s0.v + s0.a * std::abs(s0.a) / (2.0 * limits.j_max);
    double lo = std::max({std::abs(s0.v), std::abs(v_stop), 1e-9 * limits.v_max});
    double hi = limits.v_max;
    auto dur = [&](double v) {
      ScalarLimits l = limits;
      l.v_max = v;
      return total_duration(peak_profile(s0, x1, l));
    };
    if (lo < hi && dur(lo) >= T) {
      for (int it = 0; it < 200 && hi - lo > 1e-15 * limits.v_max; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dur(mid) > T) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      ScalarLimits l = limits;
      l.v_max = hi;
      segs = peak_profile(s0, x1, l);
    }
  }
  JerkProfile p(s0, std::move(segs));
  p.pad_to(T);
  return p;
}

}  // namespace paydiff
